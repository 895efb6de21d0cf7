//! Shared fixtures and definition-level oracles for the integration tests.
//!
//! The centrality oracles deliberately avoid the algorithms used in the
//! library: shortest paths come from enumerating every simple path, spectral
//! quantities from dense eigendecompositions, flows from an explicit
//! pseudo-inverse, and the Laplacian drop from literally deleting the node.
#![allow(dead_code)]

use std::collections::BTreeMap;

use fairdyn::data::{
    derive_minorities, Codebook, Dataset, MinorityMembership, OpinionRecord, Participant, Provenance, WaveCalendar,
};
use fairdyn::graph::{CentralityKind, WeightedGraph, Weighting};
use fairdyn::ml::FeatureMatrix;
use fairdyn::opinion::MisclassificationSample;
use fairdyn::{Question, Stance};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Graphs

/// Every labeled graph on `n` nodes, as edge lists with unit weights.
pub fn all_graphs(n: usize) -> impl Iterator<Item = WeightedGraph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let m = pairs.len();
    (0u64..1 << m).map(move |mask| {
        let edges: Vec<_> = pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &(i, j))| (i, j, 1.0))
            .collect();
        WeightedGraph::from_edges(n, &edges)
    })
}

pub fn is_connected(g: &WeightedGraph) -> bool {
    g.components().len() == 1
}

/// Random graph on `n` nodes with edge probability `p`, weights in (0.05, 1].
pub fn random_weighted_graph(n: usize, p: f64, rng: &mut impl Rng) -> WeightedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j, 1.0 - 0.95 * rng.random::<f64>()));
            }
        }
    }
    WeightedGraph::from_edges(n, &edges)
}

pub fn adjacency(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.n();
    let mut a = DMatrix::zeros(n, n);
    for (u, v, w) in g.edges() {
        a[(u, v)] = w;
        a[(v, u)] = w;
    }
    a
}

fn laplacian_of(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut l = -a.clone();
    for i in 0..n {
        l[(i, i)] = a.row(i).sum();
    }
    l
}

fn laplacian_energy(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(laplacian_of(a))
        .eigenvalues
        .iter()
        .map(|l| l * l)
        .sum()
}

fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let l = eig.eigenvalues[k];
        if l.abs() > 1e-9 {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / l;
        }
    }
    out
}

/// One simple path: its length and the set of interior nodes.
struct Path {
    length: f64,
    interior: u32,
}

/// All simple paths out of `s`, grouped by endpoint.
fn simple_paths(a: &DMatrix<f64>, s: usize) -> Vec<Vec<Path>> {
    let n = a.nrows();
    let mut out: Vec<Vec<Path>> = (0..n).map(|_| Vec::new()).collect();
    fn walk(a: &DMatrix<f64>, u: usize, visited: u32, length: f64, out: &mut Vec<Vec<Path>>, s: usize) {
        for v in 0..a.nrows() {
            if a[(u, v)] > 0.0 && visited >> v & 1 == 0 {
                let len = length + 1.0 / a[(u, v)];
                let interior = visited & !(1 << s);
                out[v].push(Path { length: len, interior });
                walk(a, v, visited | 1 << v, len, out, s);
            }
        }
    }
    walk(a, s, 1 << s, 0.0, &mut out, s);
    out
}

fn tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Brute-force centralities from their definitions.
pub struct Oracle {
    n: usize,
    /// Weights as given (CogSNet aggregates).
    raw: DMatrix<f64>,
    /// Weights after the weighting mode is applied.
    a: DMatrix<f64>,
    dist: DMatrix<f64>,
    paths: Vec<Vec<Vec<Path>>>,
    component: Vec<usize>,
}

impl Oracle {
    pub fn new(g: &WeightedGraph, weighting: Weighting) -> Self {
        let raw = adjacency(g);
        let a = match weighting {
            Weighting::Weighted => raw.clone(),
            Weighting::Unweighted => raw.map(|w| if w > 0.0 { 1.0 } else { 0.0 }),
        };
        let n = g.n();
        let paths: Vec<_> = (0..n).map(|s| simple_paths(&a, s)).collect();
        let mut dist = DMatrix::from_element(n, n, f64::INFINITY);
        for s in 0..n {
            dist[(s, s)] = 0.0;
            for t in 0..n {
                for p in &paths[s][t] {
                    dist[(s, t)] = dist[(s, t)].min(p.length);
                }
            }
        }
        // component label = smallest reachable node
        let component = (0..n)
            .map(|s| (0..n).find(|&t| dist[(s, t)].is_finite()).unwrap())
            .collect();
        Oracle {
            n,
            raw,
            a,
            dist,
            paths,
            component,
        }
    }

    pub fn value(&self, kind: CentralityKind) -> Vec<f64> {
        match kind {
            CentralityKind::Degree => (0..self.n).map(|u| self.neighbors(u).len() as f64).collect(),
            CentralityKind::AvgNeighborDegree => {
                self.neighbor_mean(&(0..self.n).map(|u| self.neighbors(u).len() as f64).collect::<Vec<_>>())
            }
            CentralityKind::Betweenness => self.betweenness(),
            CentralityKind::Load => self.load(),
            CentralityKind::Closeness => self.closeness(),
            CentralityKind::Eigenvector => self.eigenvector(),
            CentralityKind::PageRank => self.pagerank(),
            CentralityKind::CurrentFlowBetweenness => self.current_flow_betweenness(),
            CentralityKind::CurrentFlowCloseness => self.resistance_closeness(false),
            CentralityKind::Information => self.resistance_closeness(true),
            CentralityKind::Subgraph => self.subgraph(),
            CentralityKind::Laplacian => self.laplacian(),
            CentralityKind::CogsnetWeightSum => (0..self.n).map(|u| self.raw.row(u).sum()).collect(),
            CentralityKind::AvgNeighborCogsnetWeightSum => {
                self.neighbor_mean(&(0..self.n).map(|u| self.raw.row(u).sum()).collect::<Vec<_>>())
            }
        }
    }

    fn neighbors(&self, u: usize) -> Vec<usize> {
        (0..self.n).filter(|&v| self.a[(u, v)] > 0.0).collect()
    }

    fn neighbor_mean(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|u| {
                let nb = self.neighbors(u);
                if nb.is_empty() {
                    0.0
                } else {
                    nb.iter().map(|&v| x[v]).sum::<f64>() / nb.len() as f64
                }
            })
            .collect()
    }

    fn pair_norm(&self) -> f64 {
        let n = self.n as f64;
        if self.n > 2 {
            2.0 / ((n - 1.0) * (n - 2.0))
        } else {
            0.0
        }
    }

    /// Sum over unordered pairs of the share of shortest paths through `v`.
    fn betweenness(&self) -> Vec<f64> {
        let mut bc = vec![0.0; self.n];
        for s in 0..self.n {
            for t in s + 1..self.n {
                let d = self.dist[(s, t)];
                if !d.is_finite() {
                    continue;
                }
                let shortest: Vec<&Path> = self.paths[s][t].iter().filter(|p| tie(p.length, d)).collect();
                let total = shortest.len() as f64;
                for (v, b) in bc.iter_mut().enumerate() {
                    let through = shortest.iter().filter(|p| p.interior >> v & 1 == 1).count();
                    *b += through as f64 / total;
                }
            }
        }
        let k = self.pair_norm();
        bc.iter().map(|b| b * k).collect()
    }

    /// Newman's load: a unit packet for every ordered pair, split equally
    /// at each node among the neighbors one shortest-path step closer.
    fn load(&self) -> Vec<f64> {
        let mut load = vec![0.0; self.n];
        for s in 0..self.n {
            for t in 0..self.n {
                if s == t || !self.dist[(s, t)].is_finite() {
                    continue;
                }
                let mut packet = vec![0.0; self.n];
                packet[t] = 1.0;
                // visit in decreasing distance from s
                let mut order: Vec<usize> = (0..self.n).filter(|&x| self.dist[(s, x)].is_finite()).collect();
                order.sort_by(|&x, &y| self.dist[(s, y)].total_cmp(&self.dist[(s, x)]));
                for x in order {
                    if x == s || packet[x] == 0.0 {
                        continue;
                    }
                    if x != t {
                        load[x] += packet[x];
                    }
                    let next: Vec<usize> = self
                        .neighbors(x)
                        .into_iter()
                        .filter(|&y| tie(self.dist[(s, y)] + 1.0 / self.a[(x, y)], self.dist[(s, x)]))
                        .collect();
                    let share = packet[x] / next.len() as f64;
                    for y in next {
                        packet[y] += share;
                    }
                }
            }
        }
        let k = self.pair_norm() / 2.0;
        load.iter().map(|b| b * k).collect()
    }

    fn closeness(&self) -> Vec<f64> {
        (0..self.n)
            .map(|u| {
                let reach: Vec<f64> = (0..self.n)
                    .filter(|&v| v != u && self.dist[(u, v)].is_finite())
                    .map(|v| self.dist[(u, v)])
                    .collect();
                if reach.is_empty() {
                    return 0.0;
                }
                let r = reach.len() as f64;
                r / reach.iter().sum::<f64>() * r / (self.n - 1) as f64
            })
            .collect()
    }

    fn members(&self, c: usize) -> Vec<usize> {
        (0..self.n).filter(|&v| self.component[v] == c).collect()
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let mut labels: Vec<usize> = self.component.clone();
        labels.sort_unstable();
        labels.dedup();
        labels.into_iter().map(|c| self.members(c)).collect()
    }

    fn eigenvector(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for comp in self.components() {
            if comp.len() < 2 {
                continue;
            }
            let sub = DMatrix::from_fn(comp.len(), comp.len(), |i, j| self.a[(comp[i], comp[j])]);
            let eig = SymmetricEigen::new(sub);
            let top = eig.eigenvalues.imax();
            let v = eig.eigenvectors.column(top).map(f64::abs);
            let norm = v.norm();
            for (i, &u) in comp.iter().enumerate() {
                out[u] = v[i] / norm;
            }
        }
        out
    }

    /// Stationary vector of the Google matrix via a direct linear solve.
    fn pagerank(&self) -> Vec<f64> {
        let n = self.n;
        let alpha = 0.85;
        let strength: Vec<f64> = (0..n).map(|u| self.a.row(u).sum()).collect();
        let mut g = DMatrix::from_element(n, n, (1.0 - alpha) / n as f64);
        for u in 0..n {
            for v in 0..n {
                g[(v, u)] += if strength[u] > 0.0 {
                    alpha * self.a[(u, v)] / strength[u]
                } else {
                    alpha / n as f64
                };
            }
        }
        // (G - I) x = 0 with sum(x) = 1: replace the last equation.
        let mut m = g - DMatrix::identity(n, n);
        let mut b = DVector::zeros(n);
        for j in 0..n {
            m[(n - 1, j)] = 1.0;
        }
        b[n - 1] = 1.0;
        let x = m.lu().solve(&b).expect("google matrix system is regular");
        x.iter().copied().collect()
    }

    fn resistance(&self, pinv: &DMatrix<f64>, s: usize, t: usize) -> f64 {
        pinv[(s, s)] + pinv[(t, t)] - 2.0 * pinv[(s, t)]
    }

    fn current_flow_betweenness(&self) -> Vec<f64> {
        let pinv = pseudo_inverse(&laplacian_of(&self.a));
        let mut out = vec![0.0; self.n];
        for s in 0..self.n {
            for t in s + 1..self.n {
                if self.component[s] != self.component[t] {
                    continue;
                }
                let mut e = DVector::zeros(self.n);
                e[s] = 1.0;
                e[t] = -1.0;
                let p = &pinv * e;
                for (v, o) in out.iter_mut().enumerate() {
                    if v == s || v == t {
                        continue;
                    }
                    let inflow: f64 = (0..self.n).map(|u| self.a[(u, v)] * (p[v] - p[u]).abs()).sum();
                    *o += inflow / 2.0;
                }
            }
        }
        let k = self.pair_norm();
        out.iter().map(|b| b * k).collect()
    }

    fn resistance_closeness(&self, information: bool) -> Vec<f64> {
        let pinv = pseudo_inverse(&laplacian_of(&self.a));
        (0..self.n)
            .map(|s| {
                let comp = self.members(self.component[s]);
                if comp.len() < 2 {
                    return 0.0;
                }
                let total: f64 = comp.iter().map(|&t| self.resistance(&pinv, s, t)).sum();
                let c = comp.len() as f64;
                if information {
                    c / total
                } else {
                    (c - 1.0) / total
                }
            })
            .collect()
    }

    /// Diagonal of the exponential series `sum A^k / k!`.
    fn subgraph(&self) -> Vec<f64> {
        let n = self.n;
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..200 {
            term = &term * &self.a / k as f64;
            sum += &term;
            if term.amax() < 1e-18 {
                break;
            }
        }
        (0..n).map(|i| sum[(i, i)]).collect()
    }

    fn laplacian(&self) -> Vec<f64> {
        let energy = laplacian_energy(&self.a);
        (0..self.n)
            .map(|v| {
                if energy == 0.0 {
                    return 0.0;
                }
                let keep: Vec<usize> = (0..self.n).filter(|&u| u != v).collect();
                let sub = DMatrix::from_fn(keep.len(), keep.len(), |i, j| self.a[(keep[i], keep[j])]);
                (energy - laplacian_energy(&sub)) / energy
            })
            .collect()
    }
}

/// Largest absolute difference between the library and the oracle, over all
/// kinds, with the kind that attains it.
pub fn oracle_gap(g: &WeightedGraph, weighting: Weighting) -> (f64, CentralityKind) {
    let oracle = Oracle::new(g, weighting);
    let mut worst = (0.0, CentralityKind::Degree);
    for kind in CentralityKind::ALL {
        let got = fairdyn::graph::compute_centrality(g, kind, weighting).expect("centrality");
        let want = oracle.value(kind);
        for (x, y) in got.iter().zip(&want) {
            let d = (x - y).abs();
            if d.is_nan() || d > worst.0 {
                worst = (if d.is_nan() { f64::INFINITY } else { d }, kind);
            }
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Classifier fixtures

/// The four XOR points, each repeated `copies` times.
pub fn xor(copies: usize) -> (FeatureMatrix, Vec<u8>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..copies {
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            rows.push(vec![a, b]);
            y.push((a != b) as u8);
        }
    }
    (FeatureMatrix::new(vec!["x0".into(), "x1".into()], rows).unwrap(), y)
}

/// Two Gaussian blobs in `dims` dimensions, centers 4 standard deviations
/// apart along every axis; class 1 on the positive side.
pub fn blobs(n: usize, dims: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
    use rand_distr::{Distribution, Normal};
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let class = (i % 2) as u8;
        let center = if class == 1 { 2.0 } else { -2.0 };
        rows.push((0..dims).map(|_| center + normal.sample(&mut r)).collect());
        y.push(class);
    }
    let names = (0..dims).map(|d| format!("f{d}")).collect();
    (FeatureMatrix::new(names, rows).unwrap(), y)
}

// ---------------------------------------------------------------------------
// Ten-participant EDA fixture

pub const EDA_QUESTION: Question = Question::Jobguar;

/// Flags per participant in the order
/// (gender, ethnicity, fbprivacy, english, income, education, religion).
const FIXTURE_FLAGS: [(&str, [bool; 7]); 10] = [
    ("p01", [false, false, false, false, false, false, false]),
    ("p02", [false, true, false, false, false, false, false]),
    ("p03", [false, false, false, false, false, true, false]),
    ("p04", [false, true, false, false, false, true, false]),
    ("p05", [true, false, false, false, false, false, false]),
    ("p06", [false, true, false, false, false, true, true]),
    ("p07", [true, false, true, false, false, false, false]),
    ("p08", [false, false, false, false, false, false, false]),
    ("p09", [false, true, false, true, true, true, true]),
    ("p10", [false, false, false, false, false, true, true]),
];

/// Jobguar answers for waves 1..6; `None` means no row was recorded.
const FIXTURE_STANCES: [&str; 10] = [
    "A A A A A A",
    "A B A B A B",
    "A A B B AB AB",
    "A M B A A A",
    "B B B B B B",
    "A B M M M M",
    "AB A A B B B",
    "A - - - - -",
    "B A B A A A",
    "A A A A A B",
];

/// Misprediction targets per participant (waves 2 onward).
const FIXTURE_TARGETS: [&str; 10] = ["00000", "11100", "10", "1111", "000", "1", "011", "", "11101", "0010"];

fn fixture_participant(id: &str, f: [bool; 7]) -> Participant {
    let mut p = Participant::new(id);
    let pick = |flag: bool, yes: &'static str, no: &'static str| if flag { yes } else { no };
    let set = |p: &mut Participant, k: &str, v: &str| p.set(1, k, Some(v));
    set(&mut p, "gender", pick(f[0], "female", "male"));
    set(&mut p, "ethnicity", pick(f[1], "Asian American", "White/Caucasian"));
    set(
        &mut p,
        "fbprivacy",
        pick(f[2], "Custom", "All my friends can see my posts"),
    );
    set(&mut p, "english_native", pick(f[3], "no", "yes"));
    set(&mut p, "parents_income_bracket", pick(f[4], "$250k+", "$50k-$60k"));
    set(&mut p, "mother_education", pick(f[5], "high_school", "bachelors"));
    set(&mut p, "father_education", pick(f[5], "some_college", "graduate"));
    set(&mut p, "mother_religion", pick(f[6], "Protestant", "Roman Catholic"));
    set(&mut p, "father_religion", "Roman Catholic");
    p
}

pub struct EdaFixture {
    pub dataset: Dataset,
    pub memberships: Vec<MinorityMembership>,
    pub samples: Vec<MisclassificationSample>,
}

pub fn eda_fixture() -> EdaFixture {
    let participants: Vec<Participant> = FIXTURE_FLAGS
        .iter()
        .map(|(id, f)| fixture_participant(id, *f))
        .collect();
    let mut opinions = Vec::new();
    for ((id, _), line) in FIXTURE_FLAGS.iter().zip(FIXTURE_STANCES) {
        for (w, token) in line.split_whitespace().enumerate() {
            let stance = match token {
                "-" => continue,
                "M" => Stance::Missing,
                s => Stance::parse_canonical(s).unwrap(),
            };
            opinions.push(OpinionRecord {
                participant_id: id.to_string(),
                question: EDA_QUESTION,
                wave: w as u8 + 1,
                stance,
            });
        }
    }
    let mut samples = Vec::new();
    for ((id, _), targets) in FIXTURE_FLAGS.iter().zip(FIXTURE_TARGETS) {
        for (i, c) in targets.chars().enumerate() {
            let target = c == '1';
            samples.push(MisclassificationSample {
                participant_id: id.to_string(),
                question: EDA_QUESTION,
                wave: i as u8 + 2,
                target,
                ground_truth: Stance::A,
                predicted: if target { Stance::B } else { Stance::A },
            });
        }
    }
    let dataset = Dataset::new(
        participants,
        vec![],
        opinions,
        WaveCalendar::evenly_spaced(0, 6_000_000),
        Codebook::default(),
        Provenance::Real,
    )
    .expect("fixture is valid");
    let memberships = derive_minorities(&dataset);
    EdaFixture {
        dataset,
        memberships,
        samples,
    }
}

/// Intersection count per fixture participant.
pub fn fixture_intersections() -> BTreeMap<&'static str, u8> {
    FIXTURE_FLAGS
        .iter()
        .map(|(id, f)| (*id, f.iter().filter(|b| **b).count() as u8))
        .collect()
}
