use std::fs::File;
use std::io::BufReader;
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use super::format::{ChildRef, Header, InternalNode, LEAF_HEADER_LEN};
use super::KdError;
use crate::embedding::{squared_distance, Neighbor, TopK};

/// Work done by one k-NN query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub leaves_visited: u64,
    pub distance_computations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexStats {
    pub count: u64,
    pub dim: usize,
    pub internal_nodes: u64,
    pub leaves: u64,
    /// Edges on the longest root-to-leaf path; a single-leaf index has height 0.
    pub height: u32,
    pub bytes: u64,
}

/// Result of a full walk over every leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub points: u64,
    pub leaves: u64,
    pub min_leaf_size: u64,
    pub max_leaf_size: u64,
    pub min_leaf_depth: u32,
    pub max_leaf_depth: u32,
    /// Points lying on the wrong side of some ancestor's split plane.
    pub split_violations: u64,
    /// XOR-fold of every (id, coordinate bits) record; order independent.
    pub checksum: u64,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.split_violations == 0
    }
}

/// An opened index: header and internal nodes in memory, leaves on disk.
#[derive(Debug)]
pub struct KdIndex {
    path: PathBuf,
    file: File,
    header: Header,
    nodes: Vec<InternalNode>,
    file_len: u64,
}

struct Leaf {
    buf: Vec<u8>,
    count: usize,
}

impl KdIndex {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, KdError> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path)?;
        let file_len = file.metadata()?.len();
        let mut reader = BufReader::new(&file);
        let header = Header::read_from(&mut reader)?;
        if file_len < header.leaf_offset + LEAF_HEADER_LEN {
            return Err(KdError::Corrupt(format!(
                "file of {file_len} bytes is truncated before the leaf section"
            )));
        }
        let internal = header.internal_count as usize;
        let leaf_bytes = file_len - header.leaf_offset;
        let mut nodes = Vec::with_capacity(internal);
        for i in 0..internal {
            let node = InternalNode::read_from(&mut reader)?;
            if node.split_dim >= header.dim || !node.split_value.is_finite() {
                return Err(KdError::Corrupt(format!("internal node {i} has an invalid split")));
            }
            for child in [node.left, node.right] {
                let ok = match (child.as_internal(), child.as_leaf()) {
                    (Some(j), _) => j > i as u64 && j < internal as u64,
                    (_, Some(off)) => off < leaf_bytes,
                    _ => false,
                };
                if !ok {
                    return Err(KdError::Corrupt(format!(
                        "internal node {i} has an invalid child reference {:#x}",
                        child.0
                    )));
                }
            }
            nodes.push(node);
        }
        Ok(KdIndex {
            path,
            file,
            header,
            nodes,
            file_len,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn dim(&self) -> usize {
        self.header.dim as usize
    }

    pub fn len(&self) -> u64 {
        self.header.count
    }

    pub fn is_empty(&self) -> bool {
        self.header.count == 0
    }

    pub fn nodes(&self) -> &[InternalNode] {
        &self.nodes
    }

    fn root(&self) -> ChildRef {
        if self.nodes.is_empty() {
            ChildRef::leaf(0)
        } else {
            ChildRef::internal(0)
        }
    }

    fn read_leaf(&self, offset: u64, leaf: &mut Leaf) -> Result<(), KdError> {
        let at = self.header.leaf_offset + offset;
        let mut head = [0u8; LEAF_HEADER_LEN as usize];
        self.file.read_exact_at(&mut head, at).map_err(|e| truncated(e, at))?;
        let count = u32::from_le_bytes(head[..4].try_into().expect("4 bytes")) as usize;
        if count == 0 || count > self.header.leaf_capacity as usize {
            return Err(KdError::Corrupt(format!(
                "leaf at offset {offset} holds {count} points"
            )));
        }
        let len = count * self.header.record_len() as usize;
        if at + LEAF_HEADER_LEN + len as u64 > self.file_len {
            return Err(KdError::Corrupt(format!("leaf at offset {offset} is truncated")));
        }
        leaf.buf.resize(len, 0);
        self.file
            .read_exact_at(&mut leaf.buf, at + LEAF_HEADER_LEN)
            .map_err(|e| truncated(e, at))?;
        leaf.count = count;
        Ok(())
    }

    fn new_leaf(&self) -> Leaf {
        Leaf {
            buf: Vec::with_capacity(self.header.page_len() as usize),
            count: 0,
        }
    }

    fn check_query(&self, query: &[f32]) -> Result<(), KdError> {
        if query.len() != self.dim() {
            return Err(KdError::Dimension {
                expected: self.dim(),
                found: query.len(),
            });
        }
        if let Some(i) = query.iter().position(|c| !c.is_finite()) {
            return Err(KdError::NonFiniteQuery(i));
        }
        Ok(())
    }

    /// The exact `k` nearest points, sorted by `(distance, id)`.
    pub fn knn(&self, query: &[f32], k: usize) -> Result<Vec<Neighbor>, KdError> {
        self.knn_with_stats(query, k).map(|(n, _)| n)
    }

    pub fn knn_with_stats(
        &self,
        query: &[f32],
        k: usize,
    ) -> Result<(Vec<Neighbor>, QueryStats), KdError> {
        self.check_query(query)?;
        if k == 0 {
            return Err(KdError::InvalidK);
        }
        let k = k.min(self.header.count.min(usize::MAX as u64) as usize);
        let mut search = KnnSearch {
            index: self,
            query,
            top: TopK::new(k),
            offsets: vec![0.0; self.dim()],
            leaf: self.new_leaf(),
            coords: vec![0.0; self.dim()],
            stats: QueryStats::default(),
        };
        search.visit(self.root())?;
        let stats = search.stats;
        Ok((search.top.into_sorted_vec(), stats))
    }

    /// Ids of all points inside the closed box `[lo, hi]`, ascending.
    pub fn range(&self, lo: &[f32], hi: &[f32]) -> Result<Vec<u64>, KdError> {
        self.check_query(lo)?;
        self.check_query(hi)?;
        if let Some(d) = (0..self.dim()).find(|&d| lo[d] > hi[d]) {
            return Err(KdError::InvertedBounds(d));
        }
        let mut out = Vec::new();
        let mut leaf = self.new_leaf();
        let mut coords = vec![0f32; self.dim()];
        let mut stack = vec![self.root()];
        while let Some(child) = stack.pop() {
            if let Some(offset) = child.as_leaf() {
                self.read_leaf(offset, &mut leaf)?;
                for i in 0..leaf.count {
                    let id = decode(&leaf.buf, self.dim(), i, &mut coords);
                    if coords
                        .iter()
                        .zip(lo.iter().zip(hi))
                        .all(|(&c, (&l, &h))| l <= c && c <= h)
                    {
                        out.push(id);
                    }
                }
                continue;
            }
            let node = &self.nodes[child.0 as usize];
            let d = node.split_dim as usize;
            if hi[d] >= node.split_value {
                stack.push(node.right);
            }
            if lo[d] <= node.split_value {
                stack.push(node.left);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Summary counts, confirmed against a walk over every leaf.
    pub fn stats(&self) -> Result<IndexStats, KdError> {
        let audit = self.audit()?;
        Ok(IndexStats {
            count: audit.points,
            dim: self.dim(),
            internal_nodes: self.nodes.len() as u64,
            leaves: audit.leaves,
            height: audit.max_leaf_depth,
            bytes: self.file_len,
        })
    }

    /// Reads every leaf, checks each point against the split planes above it
    /// and reconciles counts with the header. Structural damage is an error;
    /// split violations are reported.
    pub fn audit(&self) -> Result<AuditReport, KdError> {
        let dim = self.dim();
        let mut report = AuditReport {
            points: 0,
            leaves: 0,
            min_leaf_size: u64::MAX,
            max_leaf_size: 0,
            min_leaf_depth: u32::MAX,
            max_leaf_depth: 0,
            split_violations: 0,
            checksum: 0,
        };
        let mut leaf = self.new_leaf();
        let mut coords = vec![0f32; dim];
        let mut visited = vec![false; self.nodes.len()];
        let mut leaf_end = 0u64;
        let mut stack = vec![(self.root(), 0u32, vec![f32::NEG_INFINITY; dim], vec![f32::INFINITY; dim])];
        while let Some((child, depth, lo, hi)) = stack.pop() {
            if let Some(offset) = child.as_leaf() {
                if offset != leaf_end {
                    return Err(KdError::Corrupt(format!(
                        "leaf at offset {offset} is not contiguous with the previous leaf"
                    )));
                }
                self.read_leaf(offset, &mut leaf)?;
                leaf_end = offset + LEAF_HEADER_LEN + leaf.buf.len() as u64;
                let n = leaf.count as u64;
                report.points += n;
                report.leaves += 1;
                report.min_leaf_size = report.min_leaf_size.min(n);
                report.max_leaf_size = report.max_leaf_size.max(n);
                report.min_leaf_depth = report.min_leaf_depth.min(depth);
                report.max_leaf_depth = report.max_leaf_depth.max(depth);
                for i in 0..leaf.count {
                    let id = decode(&leaf.buf, dim, i, &mut coords);
                    if coords.iter().any(|c| !c.is_finite()) {
                        return Err(KdError::Corrupt(format!("point {id} has a non-finite coordinate")));
                    }
                    if (0..dim).any(|d| coords[d] < lo[d] || coords[d] > hi[d]) {
                        report.split_violations += 1;
                    }
                    let mut h = id;
                    for &c in &coords {
                        h = h.rotate_left(17) ^ (c.to_bits() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                    }
                    report.checksum ^= h.wrapping_mul(0xff51_afd7_ed55_8ccd);
                }
                continue;
            }
            let index = child.0 as usize;
            if visited[index] {
                return Err(KdError::Corrupt(format!("internal node {index} is reachable twice")));
            }
            visited[index] = true;
            let node = self.nodes[index];
            let d = node.split_dim as usize;
            let mut right_lo = lo.clone();
            right_lo[d] = right_lo[d].max(node.split_value);
            let mut left_hi = hi.clone();
            left_hi[d] = left_hi[d].min(node.split_value);
            stack.push((node.right, depth + 1, right_lo, hi));
            stack.push((node.left, depth + 1, lo, left_hi));
        }
        if visited.iter().any(|v| !v) {
            return Err(KdError::Corrupt("unreachable internal nodes".into()));
        }
        if report.points != self.header.count {
            return Err(KdError::Corrupt(format!(
                "leaves hold {} points but the header records {}",
                report.points, self.header.count
            )));
        }
        if self.header.leaf_offset + leaf_end != self.file_len {
            return Err(KdError::Corrupt(format!(
                "{} trailing bytes after the last leaf",
                self.file_len as i128 - (self.header.leaf_offset + leaf_end) as i128
            )));
        }
        Ok(report)
    }
}

fn truncated(e: std::io::Error, at: u64) -> KdError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        KdError::Corrupt(format!("read past end of file at offset {at}"))
    } else {
        KdError::Io(e)
    }
}

#[inline]
fn decode(buf: &[u8], dim: usize, i: usize, coords: &mut [f32]) -> u64 {
    let rec = &buf[i * (8 + 4 * dim)..(i + 1) * (8 + 4 * dim)];
    for (c, chunk) in coords.iter_mut().zip(rec[8..].chunks_exact(4)) {
        *c = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
    }
    u64::from_le_bytes(rec[..8].try_into().expect("8 bytes"))
}

struct KnnSearch<'a> {
    index: &'a KdIndex,
    query: &'a [f32],
    top: TopK,
    /// Per-dimension distance from the query to the current cell.
    offsets: Vec<f64>,
    leaf: Leaf,
    coords: Vec<f32>,
    stats: QueryStats,
}

impl KnnSearch<'_> {
    fn visit(&mut self, child: ChildRef) -> Result<(), KdError> {
        if let Some(offset) = child.as_leaf() {
            return self.scan(offset);
        }
        let node = self.index.nodes[child.0 as usize];
        let d = node.split_dim as usize;
        let diff = self.query[d] as f64 - node.split_value as f64;
        let (near, far) = if diff <= 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.visit(near)?;

        let saved = self.offsets[d];
        self.offsets[d] = diff.abs().max(saved);
        // Summing the squared offsets in dimension order keeps this bound
        // below any distance computed by `squared_distance` for points in
        // the far cell.
        let bound: f64 = self.offsets.iter().map(|o| o * o).sum::<f64>().sqrt();
        let prune = self.top.worst().is_some_and(|w| bound > w.distance);
        if !prune {
            self.visit(far)?;
        }
        self.offsets[d] = saved;
        Ok(())
    }

    fn scan(&mut self, offset: u64) -> Result<(), KdError> {
        self.index.read_leaf(offset, &mut self.leaf)?;
        self.stats.leaves_visited += 1;
        let dim = self.index.dim();
        for i in 0..self.leaf.count {
            let id = decode(&self.leaf.buf, dim, i, &mut self.coords);
            let distance = squared_distance(self.query, &self.coords).sqrt();
            self.top.push(Neighbor { id, distance });
        }
        self.stats.distance_computations += self.leaf.count as u64;
        Ok(())
    }
}
