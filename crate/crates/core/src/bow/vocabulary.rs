use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

use super::BowVector;
use crate::features::Descriptor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WordId(pub u32);

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("branching factor must be at least 2 and depth at least 1 (got k={k}, L={depth})")]
    InvalidParams { k: u32, depth: u32 },
    #[error("no training descriptors")]
    NoData,
    #[error("not a vocabulary file (bad magic)")]
    BadMagic,
    #[error("corrupt vocabulary file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const MAGIC: &[u8; 5] = b"PBOW1";

/// Maximum k-medians refinement rounds per node.
const MAX_ITERATIONS: usize = 20;

/// Vocabularies with fewer potential words than this are flagged as shallow.
const SHALLOW_WORDS: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
struct Node {
    parent: Option<u32>,
    children: Vec<u32>,
    centroid: Descriptor,
    word: Option<WordId>,
    depth: u32,
}

/// Summary of how a vocabulary was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabularyMeta {
    pub k: u32,
    pub depth: u32,
    pub effective_depth: u32,
    pub leaf_count: u32,
    pub training_descriptors: u64,
    pub training_images: u64,
}

impl VocabularyMeta {
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let capacity = (self.k as u64).saturating_pow(self.depth);
        if capacity < SHALLOW_WORDS {
            out.push(format!("shallow vocabulary: k^L = {capacity} words"));
        }
        if self.training_descriptors < capacity {
            out.push(format!(
                "only {} training descriptors for up to {capacity} words",
                self.training_descriptors
            ));
        }
        if self.effective_depth < self.depth {
            out.push(format!(
                "effective depth {} is below requested depth {}",
                self.effective_depth, self.depth
            ));
        }
        if self.leaf_count <= 1 {
            out.push("vocabulary has a single effective leaf".to_string());
        }
        out
    }
}

/// Hierarchical vocabulary tree with per-word idf weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    nodes: Vec<Node>,
    idf: Vec<f64>,
    meta: VocabularyMeta,
}

fn node_rng(seed: u64, node: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (node as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// k-means++ seeding under Hamming distance; may return fewer than `k`
/// centres when the data has fewer distinct values.
fn seed_centres(data: &[Descriptor], members: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<Descriptor> {
    let mut centres = vec![data[members[rng.random_range(0..members.len())]]];
    let mut dist: Vec<f64> = members
        .iter()
        .map(|&m| data[m].hamming(&centres[0]) as f64)
        .collect();
    while centres.len() < k {
        let total: f64 = dist.iter().map(|d| d * d).sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = members.len() - 1;
        for (i, d) in dist.iter().enumerate() {
            target -= d * d;
            if target < 0.0 && *d > 0.0 {
                pick = i;
                break;
            }
        }
        let c = data[members[pick]];
        centres.push(c);
        for (i, &m) in members.iter().enumerate() {
            dist[i] = dist[i].min(data[m].hamming(&c) as f64);
        }
    }
    centres
}

fn nearest_centre(d: &Descriptor, centres: &[Descriptor]) -> usize {
    let mut best = (0, u32::MAX);
    for (i, c) in centres.iter().enumerate() {
        let h = d.hamming(c);
        if h < best.1 {
            best = (i, h);
        }
    }
    best.0
}

fn majority(data: &[Descriptor], members: &[usize]) -> Descriptor {
    let mut counts = [0u32; 256];
    for &m in members {
        for (w, word) in data[m].0.iter().enumerate() {
            let mut bits = *word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                counts[w * 64 + b] += 1;
                bits &= bits - 1;
            }
        }
    }
    let mut out = Descriptor::zero();
    for (i, &c) in counts.iter().enumerate() {
        if 2 * c as usize > members.len() {
            out.set_bit(i, true);
        }
    }
    out
}

/// k-medians with bitwise-majority centroids. Returns non-empty clusters in
/// centre order.
fn cluster(data: &[Descriptor], members: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<(Descriptor, Vec<usize>)> {
    let mut centres = seed_centres(data, members, k, rng);
    let mut assignment: Vec<usize> = members.iter().map(|&m| nearest_centre(&data[m], &centres)).collect();
    for _ in 0..MAX_ITERATIONS {
        let mut groups = vec![Vec::new(); centres.len()];
        for (i, &a) in assignment.iter().enumerate() {
            groups[a].push(members[i]);
        }
        centres = groups
            .iter()
            .zip(&centres)
            .map(|(g, c)| if g.is_empty() { *c } else { majority(data, g) })
            .collect();
        let next: Vec<usize> = members.iter().map(|&m| nearest_centre(&data[m], &centres)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let mut groups = vec![Vec::new(); centres.len()];
    for (i, &a) in assignment.iter().enumerate() {
        groups[a].push(members[i]);
    }
    centres
        .into_iter()
        .zip(groups)
        .filter(|(_, g)| !g.is_empty())
        .collect()
}

/// Builds a vocabulary tree of branching factor `k` and depth `depth` from
/// descriptors grouped by training image. Nodes are split breadth-first; a
/// node whose members cannot be split into two or more clusters becomes a
/// leaf early. Word idf is `ln(1 + N / nᵢ)` over the N training images.
pub fn train_vocabulary(
    images: &[Vec<Descriptor>],
    k: u32,
    depth: u32,
    seed: u64,
) -> Result<Vocabulary, VocabError> {
    if k < 2 || depth < 1 {
        return Err(VocabError::InvalidParams { k, depth });
    }
    let data: Vec<Descriptor> = images.iter().flatten().copied().collect();
    if data.is_empty() {
        return Err(VocabError::NoData);
    }
    let mut nodes = vec![Node {
        parent: None,
        children: Vec::new(),
        centroid: Descriptor::zero(),
        word: None,
        depth: 0,
    }];
    let mut queue = VecDeque::from([(0u32, (0..data.len()).collect::<Vec<_>>())]);
    while let Some((id, members)) = queue.pop_front() {
        let node_depth = nodes[id as usize].depth;
        if node_depth >= depth || members.len() < 2 {
            continue;
        }
        let mut rng = node_rng(seed, id);
        let clusters = cluster(&data, &members, k as usize, &mut rng);
        if clusters.len() < 2 {
            continue;
        }
        for (centroid, group) in clusters {
            let child = nodes.len() as u32;
            nodes.push(Node {
                parent: Some(id),
                children: Vec::new(),
                centroid,
                word: None,
                depth: node_depth + 1,
            });
            nodes[id as usize].children.push(child);
            queue.push_back((child, group));
        }
    }
    let mut leaf_count = 0u32;
    let mut effective_depth = 0;
    for n in nodes.iter_mut() {
        if n.children.is_empty() {
            n.word = Some(WordId(leaf_count));
            leaf_count += 1;
            effective_depth = effective_depth.max(n.depth);
        }
    }
    let mut vocab = Vocabulary {
        nodes,
        idf: vec![0.0; leaf_count as usize],
        meta: VocabularyMeta {
            k,
            depth,
            effective_depth,
            leaf_count,
            training_descriptors: data.len() as u64,
            training_images: images.len() as u64,
        },
    };
    let mut doc_freq = vec![0u64; leaf_count as usize];
    for img in images {
        let mut words: Vec<WordId> = img.iter().map(|d| vocab.word_of(d)).collect();
        words.sort();
        words.dedup();
        for w in words {
            doc_freq[w.0 as usize] += 1;
        }
    }
    let n = images.len().max(1) as f64;
    vocab.idf = doc_freq
        .iter()
        .map(|&df| (1.0 + n / df.max(1) as f64).ln())
        .collect();
    for w in vocab.meta.warnings() {
        log::warn!("{w}");
    }
    Ok(vocab)
}

impl Vocabulary {
    pub fn meta(&self) -> &VocabularyMeta {
        &self.meta
    }

    pub fn word_count(&self) -> usize {
        self.idf.len()
    }

    pub fn idf(&self, w: WordId) -> f64 {
        self.idf[w.0 as usize]
    }

    pub fn idf_table(&self) -> &[f64] {
        &self.idf
    }

    /// Descends from the root taking the nearest child (ties: first child).
    pub fn word_of(&self, d: &Descriptor) -> WordId {
        let mut node = &self.nodes[0];
        while !node.children.is_empty() {
            let mut best = (node.children[0], u32::MAX);
            for &c in &node.children {
                let h = d.hamming(&self.nodes[c as usize].centroid);
                if h < best.1 {
                    best = (c, h);
                }
            }
            node = &self.nodes[best.0 as usize];
        }
        node.word.expect("leaf has a word")
    }

    /// tf-idf weighted, L1-normalized word histogram.
    pub fn transform(&self, descriptors: &[Descriptor]) -> BowVector {
        let mut counts: BTreeMap<WordId, f64> = BTreeMap::new();
        for d in descriptors {
            *counts.entry(self.word_of(d)).or_insert(0.0) += 1.0;
        }
        let n = descriptors.len().max(1) as f64;
        for (w, c) in counts.iter_mut() {
            *c = *c / n * self.idf(*w);
        }
        BowVector::from_weights(counts)
    }

    /// Layout (little-endian): magic `PBOW1`; u32 k, L, effective depth,
    /// node count, leaf count; u64 training descriptors, training images;
    /// node table (per node: u32 parent or u32::MAX, u32 word or u32::MAX,
    /// u32 child count, child ids); centroid blob (32 bytes per node, root
    /// zero); idf table (f64 per word).
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), VocabError> {
        w.write_all(MAGIC)?;
        let m = &self.meta;
        for v in [m.k, m.depth, m.effective_depth, self.nodes.len() as u32, m.leaf_count] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&m.training_descriptors.to_le_bytes())?;
        w.write_all(&m.training_images.to_le_bytes())?;
        for n in &self.nodes {
            w.write_all(&n.parent.unwrap_or(u32::MAX).to_le_bytes())?;
            w.write_all(&n.word.map_or(u32::MAX, |x| x.0).to_le_bytes())?;
            w.write_all(&(n.children.len() as u32).to_le_bytes())?;
            for c in &n.children {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        for n in &self.nodes {
            w.write_all(&n.centroid.to_bytes())?;
        }
        for v in &self.idf {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Vocabulary, VocabError> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(VocabError::BadMagic);
        }
        let mut u32s = [0u32; 5];
        for v in u32s.iter_mut() {
            *v = read_u32(&mut r)?;
        }
        let [k, depth, effective_depth, node_count, leaf_count] = u32s;
        let training_descriptors = read_u64(&mut r)?;
        let training_images = read_u64(&mut r)?;
        if node_count == 0 || leaf_count == 0 || leaf_count > node_count {
            return Err(VocabError::Corrupt("bad node or leaf count".into()));
        }
        let mut nodes = Vec::with_capacity(node_count as usize);
        for _ in 0..node_count {
            let parent = read_u32(&mut r)?;
            let word = read_u32(&mut r)?;
            let n_children = read_u32(&mut r)?;
            if n_children > node_count {
                return Err(VocabError::Corrupt("child count exceeds node count".into()));
            }
            let children = (0..n_children)
                .map(|_| read_u32(&mut r))
                .collect::<Result<Vec<_>, _>>()?;
            if children.iter().any(|&c| c >= node_count) || (word != u32::MAX && word >= leaf_count) {
                return Err(VocabError::Corrupt("index out of range".into()));
            }
            if children.is_empty() == (word == u32::MAX) {
                return Err(VocabError::Corrupt("leaf/word mismatch".into()));
            }
            nodes.push(Node {
                parent: (parent != u32::MAX).then_some(parent),
                children,
                centroid: Descriptor::zero(),
                word: (word != u32::MAX).then_some(WordId(word)),
                depth: 0,
            });
        }
        for n in nodes.iter_mut() {
            let mut buf = [0u8; 32];
            r.read_exact(&mut buf)?;
            n.centroid = Descriptor::from_bytes(&buf);
        }
        let mut idf = Vec::with_capacity(leaf_count as usize);
        for _ in 0..leaf_count {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            idf.push(f64::from_le_bytes(buf));
        }
        for i in 0..nodes.len() {
            for c in nodes[i].children.clone() {
                nodes[c as usize].depth = nodes[i].depth + 1;
            }
        }
        Ok(Vocabulary {
            nodes,
            idf,
            meta: VocabularyMeta {
                k,
                depth,
                effective_depth,
                leaf_count,
                training_descriptors,
                training_images,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocabulary, VocabError> {
        let bytes = std::fs::read(path)?;
        Vocabulary::read_from(bytes.as_slice())
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, VocabError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, VocabError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bow::score;
    use rand::seq::index::sample;

    /// Four centres far apart, members within 5 bits of their centre, so any
    /// two members of different clusters differ by well over 10 bits.
    fn clustered(seed: u64) -> (Vec<Vec<Descriptor>>, Vec<Descriptor>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centres: Vec<Descriptor> = (0..4).map(|_| Descriptor::random(&mut rng)).collect();
        let mut images = Vec::new();
        for _ in 0..10 {
            let mut img = Vec::new();
            for c in &centres {
                for _ in 0..10 {
                    let mut d = *c;
                    let flips = rng.random_range(0..=5);
                    for b in sample(&mut rng, 256, flips).iter() {
                        d.flip_bit(b);
                    }
                    img.push(d);
                }
            }
            images.push(img);
        }
        (images, centres)
    }

    #[test]
    fn separated_clusters_get_distinct_leaves() {
        let (images, centres) = clustered(1);
        let v = train_vocabulary(&images, 4, 1, 7).unwrap();
        assert_eq!(v.word_count(), 4);
        for img in &images {
            for (ci, chunk) in img.chunks(10).enumerate() {
                let w = v.word_of(&centres[ci]);
                assert!(chunk.iter().all(|d| v.word_of(d) == w));
            }
        }
        let words: std::collections::BTreeSet<_> = centres.iter().map(|c| v.word_of(c)).collect();
        assert_eq!(words.len(), 4);
        assert!(v.idf_table().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn identical_descriptors_give_single_leaf() {
        let d = Descriptor([1, 2, 3, 4]);
        let v = train_vocabulary(&[vec![d; 20]], 2, 1, 0).unwrap();
        assert_eq!(v.word_count(), 1);
        assert!(v.meta().warnings().iter().any(|w| w.contains("single effective leaf")));
        let bow = v.transform(&[d, d]);
        assert_eq!(bow.len(), 1);
        assert!((bow.get(WordId(0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_properties() {
        let (images, _) = clustered(2);
        let v = train_vocabulary(&images, 3, 2, 5).unwrap();
        assert!(v.transform(&[]).is_empty());
        for img in &images {
            let b = v.transform(img);
            assert!((b.l1_norm() - 1.0).abs() < 1e-9);
            assert!((score(&b, &b) - 1.0).abs() < 1e-9);
        }
        assert!(v.word_count() <= 9);
    }

    #[test]
    fn same_seed_gives_identical_bytes_and_round_trips() {
        let (images, _) = clustered(3);
        let a = train_vocabulary(&images, 3, 3, 11).unwrap();
        let b = train_vocabulary(&images, 3, 3, 11).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_to(&mut ba).unwrap();
        b.write_to(&mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_eq!(&ba[..5], b"PBOW1");
        let back = Vocabulary::read_from(ba.as_slice()).unwrap();
        assert_eq!(back, a);
        assert!(matches!(Vocabulary::read_from(&b"XXXXX"[..]), Err(VocabError::BadMagic)));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(train_vocabulary(&[vec![Descriptor::zero()]], 1, 2, 0).is_err());
        assert!(train_vocabulary(&[vec![Descriptor::zero()]], 2, 0, 0).is_err());
        assert!(matches!(train_vocabulary(&[], 2, 2, 0), Err(VocabError::NoData)));
    }
}
