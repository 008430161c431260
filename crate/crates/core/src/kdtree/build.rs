use std::cmp::Ordering;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use log::{debug, warn};
use tempfile::TempDir;

use super::format::{coord_key, key_coord, ChildRef, Header, InternalNode, HEADER_LEN, LEAF_HEADER_LEN, NODE_LEN};
use super::KdError;
use crate::embedding::{EmbeddingVector, MAX_DIM, SOFT_MAX_DIM};

pub const DEFAULT_LEAF_CAPACITY: usize = 256;

const IO_BUFFER: usize = 1 << 16;
const RADIX_BITS: u32 = 16;
const KEY_BITS: u32 = 96;

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Maximum points per leaf page.
    pub leaf_capacity: usize,
    /// Bytes of point data the build may hold in memory at once.
    pub memory_budget: u64,
    /// Directory for temporary partition files; defaults to the output's directory.
    pub temp_dir: Option<PathBuf>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            leaf_capacity: DEFAULT_LEAF_CAPACITY,
            memory_budget: 1 << 30,
            temp_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildSummary {
    pub count: u64,
    pub dim: usize,
    pub internal_nodes: u64,
    pub leaves: u64,
    pub height: u32,
    /// Nodes that were partitioned on disk rather than in memory.
    pub external_partitions: u64,
    pub bytes: u64,
}

/// Points held in memory as parallel id and coordinate arrays.
struct MemPoints {
    dim: usize,
    ids: Vec<u64>,
    coords: Vec<f32>,
}

impl MemPoints {
    fn with_capacity(dim: usize, n: usize) -> Self {
        MemPoints {
            dim,
            ids: Vec::with_capacity(n),
            coords: Vec::with_capacity(n * dim),
        }
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    /// Grows geometrically but never past `cap` points.
    fn reserve_one(&mut self, cap: usize) {
        let len = self.ids.len();
        if len == self.ids.capacity() {
            let target = (len * 2).max(1024).min(cap).max(len + 1);
            self.ids.reserve_exact(target - len);
            self.coords.reserve_exact((target - len) * self.dim);
        }
    }

    fn push(&mut self, id: u64, coords: &[f32]) {
        self.ids.push(id);
        self.coords.extend_from_slice(coords);
    }

    #[inline]
    fn point(&self, i: usize) -> &[f32] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    fn coord(&self, i: usize, d: usize) -> f32 {
        self.coords[i * self.dim + d]
    }
}

/// Points of one out-of-core node, stored as raw (id, coords) records.
struct NodeFile {
    path: PathBuf,
    count: u64,
    lo: Vec<f32>,
    hi: Vec<f32>,
}

struct NodeFileWriter {
    out: BufWriter<File>,
    path: PathBuf,
    count: u64,
    lo: Vec<f32>,
    hi: Vec<f32>,
    scratch: Vec<u8>,
}

impl NodeFileWriter {
    fn create(path: PathBuf, dim: usize) -> io::Result<Self> {
        Ok(NodeFileWriter {
            out: BufWriter::with_capacity(IO_BUFFER, File::create(&path)?),
            path,
            count: 0,
            lo: vec![f32::INFINITY; dim],
            hi: vec![f32::NEG_INFINITY; dim],
            scratch: Vec::with_capacity(8 + 4 * dim),
        })
    }

    fn push(&mut self, id: u64, coords: &[f32]) -> io::Result<()> {
        encode_record(&mut self.scratch, id, coords);
        self.out.write_all(&self.scratch)?;
        for (d, &c) in coords.iter().enumerate() {
            self.lo[d] = self.lo[d].min(c);
            self.hi[d] = self.hi[d].max(c);
        }
        self.count += 1;
        Ok(())
    }

    fn finish(self) -> io::Result<NodeFile> {
        self.out.into_inner().map_err(|e| e.into_error())?;
        Ok(NodeFile {
            path: self.path,
            count: self.count,
            lo: self.lo,
            hi: self.hi,
        })
    }
}

fn encode_record(buf: &mut Vec<u8>, id: u64, coords: &[f32]) {
    buf.clear();
    buf.extend_from_slice(&id.to_le_bytes());
    for c in coords {
        buf.extend_from_slice(&c.to_le_bytes());
    }
}

/// Sequential reader over a node file.
struct NodeFileReader {
    input: BufReader<File>,
    remaining: u64,
    raw: Vec<u8>,
}

impl NodeFileReader {
    fn open(node: &NodeFile, dim: usize) -> io::Result<Self> {
        Ok(NodeFileReader {
            input: BufReader::with_capacity(IO_BUFFER, File::open(&node.path)?),
            remaining: node.count,
            raw: vec![0; 8 + 4 * dim],
        })
    }

    fn next(&mut self, coords: &mut [f32]) -> io::Result<Option<u64>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        self.input.read_exact(&mut self.raw)?;
        self.remaining -= 1;
        let id = u64::from_le_bytes(self.raw[..8].try_into().expect("8 bytes"));
        for (c, chunk) in coords.iter_mut().zip(self.raw[8..].chunks_exact(4)) {
            *c = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        }
        Ok(Some(id))
    }
}

#[inline]
fn sort_key(id: u64, coord: f32) -> u128 {
    ((coord_key(coord) as u128) << 64) | id as u128
}

struct Builder {
    dim: usize,
    leaf_capacity: usize,
    /// Largest node (in points) partitioned in memory.
    points_fit: usize,
    tmp: TempDir,
    next_file: u64,
    nodes: Vec<InternalNode>,
    leaves: BufWriter<File>,
    leaf_bytes: u64,
    leaf_count: u64,
    height: u32,
    external_partitions: u64,
    scratch: Vec<u8>,
}

impl Builder {
    fn temp_path(&mut self) -> PathBuf {
        self.next_file += 1;
        self.tmp.path().join(format!("node-{}.bin", self.next_file))
    }

    fn alloc_node(&mut self) -> usize {
        self.nodes.push(InternalNode {
            split_dim: 0,
            split_value: 0.0,
            left: ChildRef(0),
            right: ChildRef(0),
        });
        self.nodes.len() - 1
    }

    fn note_leaf(&mut self, count: u64, depth: u32) -> ChildRef {
        let at = self.leaf_bytes;
        self.leaf_bytes += LEAF_HEADER_LEN + count * (8 + 4 * self.dim as u64);
        self.leaf_count += 1;
        self.height = self.height.max(depth);
        ChildRef::leaf(at)
    }

    fn write_leaf_header(&mut self, count: usize) -> io::Result<()> {
        self.leaves.write_all(&(count as u32).to_le_bytes())?;
        self.leaves.write_all(&0u32.to_le_bytes())
    }

    fn leaf_from_memory(&mut self, pts: &MemPoints, idx: &[u32], depth: u32) -> io::Result<ChildRef> {
        self.write_leaf_header(idx.len())?;
        for &i in idx {
            encode_record(&mut self.scratch, pts.ids[i as usize], pts.point(i as usize));
            self.leaves.write_all(&self.scratch)?;
        }
        Ok(self.note_leaf(idx.len() as u64, depth))
    }

    fn leaf_from_file(&mut self, node: NodeFile, depth: u32) -> io::Result<ChildRef> {
        self.write_leaf_header(node.count as usize)?;
        let mut input = File::open(&node.path)?;
        let copied = io::copy(&mut input, &mut self.leaves)?;
        debug_assert_eq!(copied, node.count * (8 + 4 * self.dim as u64));
        drop(input);
        fs::remove_file(&node.path)?;
        Ok(self.note_leaf(node.count, depth))
    }

    fn build_memory(&mut self, pts: &MemPoints, idx: &mut [u32], depth: u32) -> io::Result<ChildRef> {
        if idx.len() <= self.leaf_capacity {
            return self.leaf_from_memory(pts, idx, depth);
        }
        let split_dim = widest_dimension(pts, idx);
        let rank = (idx.len() - 1) / 2;
        idx.select_nth_unstable_by(rank, |&a, &b| {
            let (a, b) = (a as usize, b as usize);
            coord_key(pts.coord(a, split_dim))
                .cmp(&coord_key(pts.coord(b, split_dim)))
                .then(pts.ids[a].cmp(&pts.ids[b]))
                .then(a.cmp(&b))
        });
        let split_value = pts.coord(idx[rank] as usize, split_dim);
        let node = self.alloc_node();
        let (left, right) = idx.split_at_mut(rank + 1);
        let left = self.build_memory(pts, left, depth + 1)?;
        let right = self.build_memory(pts, right, depth + 1)?;
        self.nodes[node] = InternalNode {
            split_dim: split_dim as u16,
            split_value,
            left,
            right,
        };
        Ok(ChildRef::internal(node as u64))
    }

    fn load(&self, node: &NodeFile) -> io::Result<MemPoints> {
        let n = node.count as usize;
        let mut pts = MemPoints::with_capacity(self.dim, n);
        let mut reader = NodeFileReader::open(node, self.dim)?;
        let mut coords = vec![0f32; self.dim];
        while let Some(id) = reader.next(&mut coords)? {
            pts.push(id, &coords);
        }
        Ok(pts)
    }

    fn build_file(&mut self, node: NodeFile, depth: u32) -> io::Result<ChildRef> {
        if node.count <= self.leaf_capacity as u64 {
            return self.leaf_from_file(node, depth);
        }
        if node.count <= self.points_fit as u64 {
            let pts = self.load(&node)?;
            fs::remove_file(&node.path)?;
            let mut idx: Vec<u32> = (0..pts.len() as u32).collect();
            return self.build_memory(&pts, &mut idx, depth);
        }

        let mut split_dim = 0;
        let mut best = f64::NEG_INFINITY;
        for d in 0..self.dim {
            let spread = node.hi[d] as f64 - node.lo[d] as f64;
            if spread > best {
                best = spread;
                split_dim = d;
            }
        }
        let rank = (node.count - 1) / 2;
        let (boundary, left_ties) = self.select(&node, split_dim, rank)?;
        let split_value = key_coord((boundary >> 64) as u32);
        debug!(
            "external split of {} points at depth {depth}: dim {split_dim} value {split_value}",
            node.count
        );

        let left_path = self.temp_path();
        let right_path = self.temp_path();
        let mut left = NodeFileWriter::create(left_path, self.dim)?;
        let mut right = NodeFileWriter::create(right_path, self.dim)?;
        let mut reader = NodeFileReader::open(&node, self.dim)?;
        let mut coords = vec![0f32; self.dim];
        let mut ties_taken = 0u64;
        while let Some(id) = reader.next(&mut coords)? {
            let key = sort_key(id, coords[split_dim]);
            let goes_left = match key.cmp(&boundary) {
                Ordering::Less => true,
                Ordering::Equal if ties_taken < left_ties => {
                    ties_taken += 1;
                    true
                }
                _ => false,
            };
            if goes_left {
                left.push(id, &coords)?;
            } else {
                right.push(id, &coords)?;
            }
        }
        drop(reader);
        fs::remove_file(&node.path)?;
        let (left, right) = (left.finish()?, right.finish()?);
        debug_assert_eq!(left.count, rank + 1);
        self.external_partitions += 1;

        let index = self.alloc_node();
        let left = self.build_file(left, depth + 1)?;
        let right = self.build_file(right, depth + 1)?;
        self.nodes[index] = InternalNode {
            split_dim: split_dim as u16,
            split_value,
            left,
            right,
        };
        Ok(ChildRef::internal(index as u64))
    }

    /// Finds the record at `rank` under the (coordinate, id) order, returning
    /// its key and how many records with exactly that key belong on the left.
    ///
    /// Radix selection over the 96-bit key, 16 bits per pass; once the
    /// candidate bucket fits in memory it is collected and sorted directly.
    fn select(&self, node: &NodeFile, dim: usize, rank: u64) -> io::Result<(u128, u64)> {
        let mut prefix: u128 = 0;
        let mut prefix_bits = 0u32;
        let mut target = rank;
        let mut hist = vec![0u64; 1 << RADIX_BITS];
        let mut coords = vec![0f32; self.dim];
        loop {
            hist.fill(0);
            let shift = KEY_BITS - prefix_bits - RADIX_BITS;
            let mut reader = NodeFileReader::open(node, self.dim)?;
            while let Some(id) = reader.next(&mut coords)? {
                let key = sort_key(id, coords[dim]);
                if key >> (KEY_BITS - prefix_bits) == prefix {
                    hist[((key >> shift) & 0xffff) as usize] += 1;
                }
            }
            let mut digit = 0;
            for (d, &count) in hist.iter().enumerate() {
                if target < count {
                    digit = d;
                    break;
                }
                target -= count;
            }
            let bucket = hist[digit];
            prefix = (prefix << RADIX_BITS) | digit as u128;
            prefix_bits += RADIX_BITS;
            if prefix_bits == KEY_BITS {
                return Ok((prefix, target + 1));
            }
            if bucket <= self.points_fit as u64 {
                let mut keys = Vec::with_capacity(bucket as usize);
                let mut reader = NodeFileReader::open(node, self.dim)?;
                while let Some(id) = reader.next(&mut coords)? {
                    let key = sort_key(id, coords[dim]);
                    if key >> (KEY_BITS - prefix_bits) == prefix {
                        keys.push(key);
                    }
                }
                keys.sort_unstable();
                let boundary = keys[target as usize];
                let less = keys.partition_point(|&k| k < boundary) as u64;
                return Ok((boundary, target - less + 1));
            }
        }
    }
}

fn widest_dimension(pts: &MemPoints, idx: &[u32]) -> usize {
    let mut lo = vec![f32::INFINITY; pts.dim];
    let mut hi = vec![f32::NEG_INFINITY; pts.dim];
    for &i in idx {
        for (d, &c) in pts.point(i as usize).iter().enumerate() {
            lo[d] = lo[d].min(c);
            hi[d] = hi[d].max(c);
        }
    }
    let mut best = 0;
    let mut best_spread = f64::NEG_INFINITY;
    for d in 0..pts.dim {
        let spread = hi[d] as f64 - lo[d] as f64;
        if spread > best_spread {
            best_spread = spread;
            best = d;
        }
    }
    best
}

/// Builds an index file at `out_path` from a stream of points.
///
/// The output is written to a temporary name in the same directory and
/// renamed into place on success. Peak memory for point data stays within
/// `memory_budget`; beyond that the build keeps the internal-node array
/// (24 bytes per node), a 512 KiB selection histogram and a few I/O buffers.
pub fn build<I, E>(
    points: I,
    dim: usize,
    options: &BuildOptions,
    out_path: impl AsRef<Path>,
) -> Result<BuildSummary, KdError>
where
    I: IntoIterator<Item = Result<(u64, EmbeddingVector), E>>,
    KdError: From<E>,
{
    let out_path = out_path.as_ref();
    if dim == 0 || dim > MAX_DIM {
        return Err(KdError::BadDimension(dim));
    }
    if dim > SOFT_MAX_DIM {
        warn!("indexing {dim}-dimensional data; k-d tree pruning is weak above {SOFT_MAX_DIM} dimensions");
    }
    if options.leaf_capacity == 0 || options.leaf_capacity > u32::MAX as usize {
        return Err(KdError::LeafCapacity);
    }
    let record_len = 8 + 4 * dim as u64;
    let page = LEAF_HEADER_LEN + options.leaf_capacity as u64 * record_len;
    if options.memory_budget < page {
        return Err(KdError::MemoryBudget {
            budget: options.memory_budget,
            page,
        });
    }
    // Per point: id, coordinates and a u32 permutation slot, doubled to
    // leave headroom for buffer growth.
    let per_point = 2 * (record_len + 4);
    let points_fit = ((options.memory_budget / per_point) as usize)
        .max(1)
        .min(u32::MAX as usize);

    let out_dir = match out_path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let tmp_parent = options.temp_dir.clone().unwrap_or_else(|| out_dir.clone());
    let tmp = tempfile::Builder::new()
        .prefix(".kdt-build-")
        .tempdir_in(&tmp_parent)?;
    let leaves_path = tmp.path().join("leaves.bin");
    let mut builder = Builder {
        dim,
        leaf_capacity: options.leaf_capacity,
        points_fit,
        leaves: BufWriter::with_capacity(IO_BUFFER, File::create(&leaves_path)?),
        tmp,
        next_file: 0,
        nodes: Vec::new(),
        leaf_bytes: 0,
        leaf_count: 0,
        height: 0,
        external_partitions: 0,
        scratch: Vec::with_capacity(record_len as usize),
    };

    // Ingest: buffer in memory until the budget is exceeded, then spill.
    let mut mem = MemPoints::with_capacity(dim, 0);
    let mut spill: Option<NodeFileWriter> = None;
    let mut count = 0u64;
    let mut coords = vec![0f32; dim];
    for item in points {
        let (id, vector) = item?;
        if vector.dim() != dim {
            return Err(KdError::Dimension {
                expected: dim,
                found: vector.dim(),
            });
        }
        for (c, &v) in coords.iter_mut().zip(vector.as_slice()) {
            *c = if v == 0.0 { 0.0 } else { v };
        }
        count += 1;
        if let Some(writer) = spill.as_mut() {
            writer.push(id, &coords)?;
            continue;
        }
        if mem.len() == points_fit {
            let path = builder.temp_path();
            let mut writer = NodeFileWriter::create(path, dim)?;
            for i in 0..mem.len() {
                writer.push(mem.ids[i], mem.point(i))?;
            }
            mem = MemPoints::with_capacity(dim, 0);
            writer.push(id, &coords)?;
            spill = Some(writer);
            continue;
        }
        mem.reserve_one(points_fit);
        mem.push(id, &coords);
    }
    if count == 0 {
        return Err(KdError::Empty);
    }

    match spill {
        Some(writer) => {
            let node = writer.finish()?;
            builder.build_file(node, 0)?;
        }
        None => {
            let mut idx: Vec<u32> = (0..mem.len() as u32).collect();
            builder.build_memory(&mem, &mut idx, 0)?;
            drop(idx);
            drop(mem);
        }
    }

    let leaves_file = builder
        .leaves
        .into_inner()
        .map_err(|e| e.into_error())?;
    drop(leaves_file);

    let header = Header {
        dim: dim as u16,
        count,
        leaf_capacity: options.leaf_capacity as u32,
        internal_count: builder.nodes.len() as u64,
        leaf_offset: HEADER_LEN + builder.nodes.len() as u64 * NODE_LEN,
    };
    let staged = tempfile::Builder::new()
        .prefix(".kdt-out-")
        .tempfile_in(&out_dir)?;
    let mut out = BufWriter::with_capacity(IO_BUFFER, staged);
    header.write_to(&mut out)?;
    for node in &builder.nodes {
        node.write_to(&mut out)?;
    }
    let mut leaves = File::open(&leaves_path)?;
    io::copy(&mut leaves, &mut out)?;
    drop(leaves);
    let mut staged = out.into_inner().map_err(|e| e.into_error())?;
    let bytes = staged.as_file_mut().seek(SeekFrom::End(0))?;
    debug_assert_eq!(bytes, header.leaf_offset + builder.leaf_bytes);
    staged.persist(out_path).map_err(|e| e.error)?;

    Ok(BuildSummary {
        count,
        dim,
        internal_nodes: builder.nodes.len() as u64,
        leaves: builder.leaf_count,
        height: builder.height,
        external_partitions: builder.external_partitions,
        bytes,
    })
}
