//! Stopped family trees.
//!
//! The stopped tree at level `n` holds the life of every individual born at
//! time `≤ n`; daughters born after `n` appear as stubs carrying only their
//! birth time. The stubs form the coming generation. Trees are ordered:
//! daughter `i` of a mother is the one born at her `i`-th bearing age.
//!
//! Vertices live in an arena in the order they were grown (breadth first:
//! mothers before daughters, sisters contiguous). Index 0 is the root.

use std::fmt;
use std::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::law::{LifeOutcome, ReproductionLaw};
use crate::spine::SpineLaw;
use crate::stats::CompensatedSum;

/// Default cap on the number of vertices (materialized plus stubs).
pub const DEFAULT_MAX_VERTICES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("tree exceeded the budget of {limit} vertices")]
    DepthBudget { limit: usize },
    #[error("malformed tree encoding at byte {at}: {reason}")]
    BadEncoding { at: usize, reason: String },
}

/// Ulam-Harris label: the empty path is the root, `x·i` is the `i`-th
/// daughter of `x`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexLabel(Vec<u32>);

impl VertexLabel {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn from_path(path: &[u32]) -> Self {
        Self(path.to_vec())
    }

    pub fn child(&self, i: u32) -> Self {
        let mut path = self.0.clone();
        path.push(i);
        Self(path)
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }

    pub fn generation(&self) -> usize {
        self.0.len()
    }

    /// The label with the first step removed (`y₋₁` for `y = (j, i₁, …)`).
    pub fn without_first(&self) -> Self {
        Self(self.0.iter().skip(1).copied().collect())
    }

    /// `(i, rest)` for `self = (i, rest…)`.
    pub fn prepend(&self, i: u32) -> Self {
        let mut path = Vec::with_capacity(self.0.len() + 1);
        path.push(i);
        path.extend_from_slice(&self.0);
        Self(path)
    }
}

impl fmt::Display for VertexLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("0");
        }
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(".")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    parent: Option<usize>,
    rank: u32,
    birth: u32,
    life: Option<LifeOutcome>,
    first_child: usize,
}

impl Vertex {
    pub fn parent(&self) -> Option<usize> {
        self.parent
    }

    /// Position among the mother's daughters (1-based); 0 for the root.
    pub fn rank(&self) -> u32 {
        self.rank
    }

    /// Birth time σ.
    pub fn birth(&self) -> u32 {
        self.birth
    }

    /// The life, or `None` for a coming-generation stub.
    pub fn life(&self) -> Option<&LifeOutcome> {
        self.life.as_ref()
    }

    pub fn is_stub(&self) -> bool {
        self.life.is_none()
    }

    /// Arena indices of the daughters (empty for stubs).
    pub fn children(&self) -> Range<usize> {
        match &self.life {
            Some(l) => self.first_child..self.first_child + l.offspring(),
            None => 0..0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppedTree {
    level: u32,
    vertices: Vec<Vertex>,
}

/// Arena builder shared by all growth procedures.
struct Builder {
    level: u32,
    max_vertices: usize,
    vertices: Vec<Vertex>,
}

impl Builder {
    fn new(level: u32, max_vertices: usize) -> Self {
        Self {
            level,
            max_vertices,
            vertices: vec![Vertex {
                parent: None,
                rank: 0,
                birth: 0,
                life: None,
                first_child: 0,
            }],
        }
    }

    /// Gives vertex `i` its life and appends its daughters.
    fn attach(&mut self, i: usize, life: LifeOutcome) -> Result<(), TreeError> {
        let birth = self.vertices[i].birth;
        let first = self.vertices.len();
        if first + life.offspring() > self.max_vertices {
            return Err(TreeError::DepthBudget {
                limit: self.max_vertices,
            });
        }
        for (k, &age) in life.ages().iter().enumerate() {
            self.vertices.push(Vertex {
                parent: Some(i),
                rank: k as u32 + 1,
                birth: birth + age,
                life: None,
                first_child: 0,
            });
        }
        let v = &mut self.vertices[i];
        v.first_child = first;
        v.life = Some(life);
        Ok(())
    }

    fn finish(self) -> StoppedTree {
        StoppedTree {
            level: self.level,
            vertices: self.vertices,
        }
    }
}

/// Grows `[T]_n` with the default vertex budget.
pub fn grow_stopped_tree<R: Rng + ?Sized>(
    law: &ReproductionLaw,
    n: u32,
    rng: &mut R,
) -> Result<StoppedTree, TreeError> {
    grow_stopped_tree_capped(law, n, DEFAULT_MAX_VERTICES, rng)
}

pub fn grow_stopped_tree_capped<R: Rng + ?Sized>(
    law: &ReproductionLaw,
    n: u32,
    max_vertices: usize,
    rng: &mut R,
) -> Result<StoppedTree, TreeError> {
    let mut b = Builder::new(n, max_vertices);
    let mut i = 0;
    while i < b.vertices.len() {
        if b.vertices[i].birth <= n {
            let life = law.sample_life(rng);
            b.attach(i, life)?;
        }
        i += 1;
    }
    Ok(b.finish())
}

impl StoppedTree {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Vertex {
        &self.vertices[i]
    }

    /// Total number of vertices, stubs included.
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn root_life(&self) -> &LifeOutcome {
        self.vertices[0]
            .life
            .as_ref()
            .expect("the root is born at time 0 and always materialized")
    }

    /// Individuals born by the level, with their lives.
    pub fn materialized(&self) -> impl Iterator<Item = (usize, u32, &LifeOutcome)> + '_ {
        self.vertices
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.life.as_ref().map(|l| (i, v.birth, l)))
    }

    /// Number of individuals born by the level.
    pub fn total_births(&self) -> usize {
        self.vertices.iter().filter(|v| v.life.is_some()).count()
    }

    pub fn stubs(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.life.is_none())
            .map(|(i, v)| (i, v.birth))
    }

    pub fn coming_generation_size(&self) -> usize {
        self.vertices.len() - self.total_births()
    }

    pub fn is_extinct(&self) -> bool {
        self.coming_generation_size() == 0
    }

    pub fn label(&self, mut i: usize) -> VertexLabel {
        let mut path = Vec::new();
        while let Some(p) = self.vertices[i].parent {
            path.push(self.vertices[i].rank);
            i = p;
        }
        path.reverse();
        VertexLabel(path)
    }

    /// Arena index of the vertex with the given label, if present.
    pub fn find(&self, label: &VertexLabel) -> Option<usize> {
        let mut i = 0;
        for &step in label.path() {
            let children = self.vertices[i].children();
            if step == 0 || step as usize > children.len() {
                return None;
            }
            i = children.start + step as usize - 1;
        }
        Some(i)
    }

    /// The coming generation: `(label, σ_y)` for each stub.
    pub fn coming_generation(&self) -> Vec<(VertexLabel, u32)> {
        self.stubs().map(|(i, b)| (self.label(i), b)).collect()
    }

    /// N_n = Σ_{y ∈ I_n} e^{-α σ_y}.
    pub fn nerman_martingale(&self, alpha: f64) -> f64 {
        self.stubs()
            .map(|(_, b)| (-alpha * f64::from(b)).exp())
            .sum::<CompensatedSum>()
            .value()
    }

    /// Canonical string:
    /// `vertex := '[' ages ']' vertex*  |  '+' age`, daughters in rank
    /// order, stubs written as `+` and the mother's age at their birth.
    pub fn encode(&self) -> String {
        let mut out = String::new();
        self.encode_from(0, &mut out);
        out
    }

    fn encode_from(&self, i: usize, out: &mut String) {
        use std::fmt::Write;
        let v = &self.vertices[i];
        match &v.life {
            None => {
                let mother = v.parent.map(|p| self.vertices[p].birth).unwrap_or(0);
                let _ = write!(out, "+{}", v.birth - mother);
            }
            Some(life) => {
                out.push('[');
                for (k, a) in life.ages().iter().enumerate() {
                    if k > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{a}");
                }
                out.push(']');
                for c in v.children() {
                    self.encode_from(c, out);
                }
            }
        }
    }

    /// Inverse of [`encode`](Self::encode). Checks that materialized
    /// vertices are born by `level` and stubs after it.
    pub fn from_encoding(level: u32, text: &str) -> Result<Self, TreeError> {
        let bytes = text.as_bytes();
        let mut pos = 0;
        let root = parse_vertex(bytes, &mut pos)?;
        if pos != bytes.len() {
            return Err(bad(pos, "trailing input"));
        }
        let ParsedVertex::Life(..) = &root else {
            return Err(bad(0, "the root must be materialized"));
        };
        let mut b = Builder::new(level, usize::MAX);
        let mut queue = std::collections::VecDeque::from([(0usize, root)]);
        while let Some((i, node)) = queue.pop_front() {
            match node {
                ParsedVertex::Stub(age) => {
                    if b.vertices[i].birth <= level {
                        return Err(bad(0, "stub born within the level"));
                    }
                    if let Some(p) = b.vertices[i].parent {
                        let ages = b.vertices[p].life.as_ref().map(LifeOutcome::ages);
                        if ages.and_then(|a| a.get(b.vertices[i].rank as usize - 1)) != Some(&age) {
                            return Err(bad(0, "stub offset disagrees with the mother's ages"));
                        }
                    }
                }
                ParsedVertex::Life(ages, children) => {
                    if b.vertices[i].birth > level {
                        return Err(bad(0, "materialized vertex born after the level"));
                    }
                    let life = LifeOutcome::new(&ages)
                        .map_err(|e| bad(0, &e.to_string()))?;
                    if children.len() != life.offspring() {
                        return Err(bad(0, "daughter count differs from ages"));
                    }
                    b.attach(i, life)?;
                    let first = b.vertices[i].first_child;
                    for (k, c) in children.into_iter().enumerate() {
                        queue.push_back((first + k, c));
                    }
                }
            }
        }
        Ok(b.finish())
    }

    /// `[T]_m` for `m ≤ level`: individuals born after `m` lose their lives
    /// and become stubs, and their descendants disappear.
    pub fn truncate(&self, m: u32) -> StoppedTree {
        assert!(m <= self.level, "can only truncate to a lower level");
        let mut b = Builder::new(m, usize::MAX);
        let mut old_of = vec![0usize];
        let mut i = 0;
        while i < b.vertices.len() {
            let old = old_of[i];
            if b.vertices[i].birth <= m {
                let life = self.vertices[old]
                    .life
                    .clone()
                    .expect("vertices born by a lower level are materialized");
                b.attach(i, life).expect("unbounded budget");
                old_of.extend(self.vertices[old].children());
            }
            i += 1;
        }
        b.finish()
    }
}

enum ParsedVertex {
    Life(Vec<u32>, Vec<ParsedVertex>),
    Stub(u32),
}

fn bad(at: usize, reason: &str) -> TreeError {
    TreeError::BadEncoding {
        at,
        reason: reason.to_string(),
    }
}

fn parse_number(bytes: &[u8], pos: &mut usize) -> Result<u32, TreeError> {
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad(start, "expected a number"))
}

fn parse_vertex(bytes: &[u8], pos: &mut usize) -> Result<ParsedVertex, TreeError> {
    match bytes.get(*pos) {
        Some(b'+') => {
            *pos += 1;
            Ok(ParsedVertex::Stub(parse_number(bytes, pos)?))
        }
        Some(b'[') => {
            *pos += 1;
            let mut ages = Vec::new();
            if bytes.get(*pos) != Some(&b']') {
                loop {
                    ages.push(parse_number(bytes, pos)?);
                    match bytes.get(*pos) {
                        Some(b',') => *pos += 1,
                        Some(b']') => break,
                        _ => return Err(bad(*pos, "expected ',' or ']'")),
                    }
                }
            }
            *pos += 1;
            let children = (0..ages.len())
                .map(|_| parse_vertex(bytes, pos))
                .collect::<Result<_, _>>()?;
            Ok(ParsedVertex::Life(ages, children))
        }
        _ => Err(bad(*pos, "expected '[' or '+'")),
    }
}

pub fn coming_generation(tree: &StoppedTree) -> Vec<(VertexLabel, u32)> {
    tree.coming_generation()
}

pub fn nerman_martingale(tree: &StoppedTree, alpha: f64) -> f64 {
    tree.nerman_martingale(alpha)
}

/// A stopped tree with its immortal lineage `y₀ = root, y₁, …, y_{u_n}`,
/// where `y_{u_n}` is the first immortal born after the level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinedTree {
    tree: StoppedTree,
    spine: Vec<usize>,
}

pub fn grow_spined_tree<R: Rng + ?Sized>(
    spine_law: &SpineLaw,
    n: u32,
    rng: &mut R,
) -> Result<SpinedTree, TreeError> {
    grow_spined_tree_capped(spine_law, n, DEFAULT_MAX_VERTICES, rng)
}

pub fn grow_spined_tree_capped<R: Rng + ?Sized>(
    spine_law: &SpineLaw,
    n: u32,
    max_vertices: usize,
    rng: &mut R,
) -> Result<SpinedTree, TreeError> {
    let law = spine_law.base();
    let mut b = Builder::new(n, max_vertices);
    let mut spine = vec![0usize];
    let mut i = 0;
    while i < b.vertices.len() {
        if b.vertices[i].birth <= n {
            if spine.last() == Some(&i) {
                let immortal = spine_law.sample_spine_life(rng);
                let rank = immortal.rank();
                b.attach(i, immortal.life().clone())?;
                spine.push(b.vertices[i].first_child + rank - 1);
            } else {
                let life = law.sample_life(rng);
                b.attach(i, life)?;
            }
        }
        i += 1;
    }
    Ok(SpinedTree {
        tree: b.finish(),
        spine,
    })
}

impl SpinedTree {
    /// Pairs a tree with the coming-generation vertex `y`, reconstructing
    /// the lineage from the root. Returns `None` unless `y` is a stub.
    pub fn from_parts(tree: StoppedTree, y: &VertexLabel) -> Option<Self> {
        let end = tree.find(y)?;
        if !tree.vertex(end).is_stub() {
            return None;
        }
        let mut spine = vec![end];
        let mut i = end;
        while let Some(p) = tree.vertex(i).parent() {
            spine.push(p);
            i = p;
        }
        spine.reverse();
        Some(Self { tree, spine })
    }

    pub fn tree(&self) -> &StoppedTree {
        &self.tree
    }

    pub fn into_tree(self) -> StoppedTree {
        self.tree
    }

    /// Arena indices of `y₀, …, y_{u_n}`.
    pub fn spine(&self) -> &[usize] {
        &self.spine
    }

    /// u_n = min{u : σ_{y_u} > n}.
    pub fn spine_generation(&self) -> usize {
        self.spine.len() - 1
    }

    pub fn spine_labels(&self) -> Vec<VertexLabel> {
        self.spine.iter().map(|&i| self.tree.label(i)).collect()
    }

    /// Rank of each immortal daughter within her mother's brood.
    pub fn spine_ranks(&self) -> Vec<u32> {
        self.spine[1..].iter().map(|&i| self.tree.vertex(i).rank()).collect()
    }

    /// y_{u_n}, the immortal member of the coming generation.
    pub fn immortal_stub(&self) -> VertexLabel {
        self.tree.label(*self.spine.last().expect("spine has a root"))
    }

    /// Differences of consecutive spine birth times.
    pub fn spine_increments(&self) -> Vec<u32> {
        self.spine
            .windows(2)
            .map(|w| self.tree.vertex(w[1]).birth() - self.tree.vertex(w[0]).birth())
            .collect()
    }
}

pub fn spine_increments(st: &SpinedTree) -> Vec<u32> {
    st.spine_increments()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::malthus::{solve_malthusian, DEFAULT_TOL};
    use crate::spine::build_spine_law;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn law(p0: f64, atoms: &[(f64, &[i64])]) -> ReproductionLaw {
        ReproductionLaw::new(p0, atoms).unwrap()
    }

    fn spine_of(law: &ReproductionLaw) -> SpineLaw {
        let alpha = solve_malthusian(law, DEFAULT_TOL).unwrap().alpha;
        build_spine_law(law, alpha).unwrap()
    }

    const X: f64 = 0.618_033_988_749_894_8;

    #[test]
    fn extinct_law_gives_single_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = grow_stopped_tree(&law(1.0, &[]), 5, &mut rng).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.coming_generation().is_empty());
        assert!(t.is_extinct());
        assert_eq!(t.nerman_martingale(0.3), 0.0);
    }

    #[test]
    fn deterministic_law_b_at_level_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = grow_stopped_tree(&law(0.0, &[(1.0, &[1, 2])]), 1, &mut rng).unwrap();
        assert_eq!(t.total_births(), 2);
        let mut births: Vec<u32> = t.coming_generation().iter().map(|(_, b)| *b).collect();
        births.sort();
        assert_eq!(births, vec![2, 2, 3]);
        let labels: Vec<String> = t.coming_generation().iter().map(|(l, _)| l.to_string()).collect();
        assert_eq!(labels, vec!["2", "1.1", "1.2"]);
        let alpha = -X.ln();
        assert!((t.nerman_martingale(alpha) - 1.0).abs() < 1e-12);
        assert_eq!(t.encode(), "[1,2][1,2]+1+2+2");
    }

    #[test]
    fn level_zero_is_the_root_branch() {
        let a = law(0.25, &[(0.75, &[1, 1])]);
        let alpha = 1.5f64.ln();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let t = grow_stopped_tree(&a, 0, &mut rng).unwrap();
            assert_eq!(t.total_births(), 1);
            let gen = t.coming_generation();
            assert!(gen.is_empty() || gen.len() == 2);
            assert!(gen.iter().all(|(_, b)| *b == 1));
            let xi = t.root_life().reproductive_value(alpha);
            assert!((t.nerman_martingale(alpha) - xi).abs() < 1e-15);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = law(0.0, &[(1.0, &[1, 2])]);
        let err = grow_stopped_tree_capped(&b, 30, 1000, &mut rng).unwrap_err();
        assert_eq!(err, TreeError::DepthBudget { limit: 1000 });
    }

    #[test]
    fn encoding_round_trips_and_validates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = law(0.2, &[(0.3, &[1]), (0.5, &[1, 3])]);
        for _ in 0..200 {
            let t = grow_stopped_tree(&e, 4, &mut rng).unwrap();
            let parsed = StoppedTree::from_encoding(4, &t.encode()).unwrap();
            assert_eq!(parsed, t);
        }
        assert!(StoppedTree::from_encoding(0, "[1,2][1,2]+1+2+2").is_err());
        assert!(StoppedTree::from_encoding(1, "[1,2][1,2]+1+2").is_err());
        assert!(StoppedTree::from_encoding(1, "+1").is_err());
        assert!(StoppedTree::from_encoding(1, "[1,2][1,2]+1+2+3").is_err());
    }

    #[test]
    fn truncation_matches_lower_level_growth() {
        let b = law(0.0, &[(1.0, &[1, 2])]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t4 = grow_stopped_tree(&b, 4, &mut rng).unwrap();
        let t2 = grow_stopped_tree(&b, 2, &mut rng).unwrap();
        assert_eq!(t4.truncate(2), t2);
        assert_eq!(t4.truncate(4), t4);
    }

    #[test]
    fn labels_and_find_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let e = law(0.2, &[(0.3, &[1]), (0.5, &[1, 3])]);
        let t = grow_stopped_tree(&e, 5, &mut rng).unwrap();
        for i in 0..t.len() {
            assert_eq!(t.find(&t.label(i)), Some(i));
        }
        assert_eq!(t.find(&VertexLabel::from_path(&[9])), None);
    }

    #[test]
    fn law_a_spine_is_born_every_year() {
        let s = spine_of(&law(0.25, &[(0.75, &[1, 1])]));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let st = grow_spined_tree(&s, 2, &mut rng).unwrap();
            assert_eq!(st.spine_generation(), 3);
            assert!(st.spine_ranks().iter().all(|r| (1..=2).contains(r)));
            let st = grow_spined_tree(&s, 5, &mut rng).unwrap();
            assert_eq!(st.spine_increments(), vec![1; 6]);
        }
    }

    #[test]
    fn delayed_spine_increments() {
        let s = spine_of(&law(0.0, &[(1.0, &[2, 2])]));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let st = grow_spined_tree(&s, 4, &mut rng).unwrap();
        assert_eq!(st.spine_increments(), vec![2, 2, 2]);
    }

    #[test]
    fn spine_ends_at_the_first_immortal_stub() {
        let e = law(0.2, &[(0.3, &[1]), (0.5, &[1, 3])]);
        let s = spine_of(&e);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let st = grow_spined_tree(&s, 6, &mut rng).unwrap();
            let t = st.tree();
            let (last, inner) = st.spine().split_last().unwrap();
            assert!(t.vertex(*last).is_stub());
            assert!(t.vertex(*last).birth() > 6);
            assert!(t.vertex(*last).birth() <= 6 + e.max_age());
            assert!(inner.iter().all(|&i| !t.vertex(i).is_stub()));
            let total: u32 = st.spine_increments().iter().sum();
            assert_eq!(total, t.vertex(*last).birth());
            let rebuilt = SpinedTree::from_parts(t.clone(), &st.immortal_stub()).unwrap();
            assert_eq!(rebuilt.spine(), st.spine());
        }
    }
}
