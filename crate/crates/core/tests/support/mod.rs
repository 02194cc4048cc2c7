//! Independent reference implementations shared by integration and acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tanwb_core::eval::ScoredCase;
use tanwb_core::tan::counts::CountCube;
use tanwb_core::tan::model::Cpt;
use tanwb_core::tan::mst::{Edge, WeightMatrix};
use tanwb_core::{OutcomeLabel, TanModel, TanStructure, Task};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_close(got: f64, want: f64, rel: f64) -> bool {
    got == want || (got - want).abs() <= rel * want.abs().max(got.abs())
}

// ---------------------------------------------------------------- inference

/// Random TAN model with `n` features of 2..=max_states states each.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize, max_states: usize) -> TanModel {
    let cards: Vec<usize> = (0..n).map(|_| rng.random_range(2..=max_states)).collect();
    let root = rng.random_range(0..n);
    // random recursive tree over a random ordering with `root` first
    let mut order: Vec<usize> = (0..n).filter(|&f| f != root).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    order.insert(0, root);
    let mut parents = vec![None; n];
    for i in 1..n {
        parents[order[i]] = Some(order[rng.random_range(0..i)]);
    }
    let structure = TanStructure::new(root, parents).unwrap();
    let mut row = |k: usize| -> Vec<f64> {
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    };
    let cpts = (0..n)
        .map(|f| {
            let ps = structure.parent(f).map_or(1, |p| cards[p]);
            let probs: Vec<f64> = (0..2 * ps).flat_map(|_| row(cards[f])).collect();
            Cpt::new(ps, cards[f], probs).unwrap()
        })
        .collect();
    let p1 = row(2);
    TanModel::from_parts("oracle", Task::Bm, 0.5, structure, [p1[0], p1[1]], cpts).unwrap()
}

/// Every assignment of the given cardinalities, first feature varying fastest.
pub fn all_assignments(cards: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = cards.iter().product();
    (0..total)
        .map(|mut code| {
            cards
                .iter()
                .map(|&k| {
                    let s = code % k;
                    code /= k;
                    s
                })
                .collect()
        })
        .collect()
}

/// P(positive | x) from the full joint table over (class, x), built in linear space
/// straight from the serialized parameters.
pub fn posterior_by_enumeration(model: &TanModel, evidence: &[usize]) -> f64 {
    let file = model.to_file();
    let prior: Vec<f64> = file.prior.iter().map(|s| s.parse().unwrap()).collect();
    let parents = &file.structure.parents;
    let cards: Vec<usize> = file.cpts.iter().map(|t| t[0][0].len()).collect();
    let table = |f: usize, c: usize, p: usize, x: usize| -> f64 { file.cpts[f][c][p][x].parse().unwrap() };
    let mut joint = Vec::new();
    let mut evidence_pos = 0;
    for (i, x) in all_assignments(&cards).into_iter().enumerate() {
        if x == evidence {
            evidence_pos = i;
        }
        let mut per_class = [0.0; 2];
        for (c, slot) in per_class.iter_mut().enumerate() {
            let mut p = prior[c];
            for f in 0..cards.len() {
                p *= table(f, c, parents[f].map_or(0, |q| x[q]), x[f]);
            }
            *slot = p;
        }
        joint.push(per_class);
    }
    let z: f64 = joint.iter().map(|r| r[0] + r[1]).sum();
    let [a, b] = joint[evidence_pos].map(|v| v / z);
    b / (a + b)
}

// ---------------------------------------------------------------- spanning tree

pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> WeightMatrix {
    // coarse values so ties occur
    WeightMatrix::from_fn(n, |_, _| rng.random_range(0..20) as f64 / 4.0)
}

/// Maximum total weight over every spanning tree, by enumerating edge subsets.
pub fn brute_force_max_tree_weight(w: &WeightMatrix) -> f64 {
    let n = w.len();
    if n <= 1 {
        return 0.0;
    }
    let edges: Vec<Edge> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << edges.len()) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let mut comp: Vec<usize> = (0..n).collect();
        fn find(c: &mut [usize], mut a: usize) -> usize {
            while c[a] != a {
                a = c[a];
            }
            a
        }
        let mut acyclic = true;
        let mut total = 0.0;
        for (k, &(i, j)) in edges.iter().enumerate() {
            if mask >> k & 1 == 1 {
                let (a, b) = (find(&mut comp, i), find(&mut comp, j));
                if a == b {
                    acyclic = false;
                    break;
                }
                comp[a] = b;
                total += w.get(i, j);
            }
        }
        if acyclic {
            best = best.max(total);
        }
    }
    best
}

// ---------------------------------------------------------------- mutual information

pub struct RandomTable {
    pub cards: Vec<usize>,
    pub classes: Vec<usize>,
    pub columns: Vec<Vec<usize>>,
}

/// Random categorical sample with some dependence between the two features.
pub fn random_table(rng: &mut ChaCha8Rng) -> RandomTable {
    let cards = vec![rng.random_range(2..=4), rng.random_range(2..=4)];
    let n = rng.random_range(1..=200);
    let couple: f64 = rng.random_range(0.0..1.0);
    let mut classes = Vec::with_capacity(n);
    let mut columns = vec![Vec::with_capacity(n), Vec::with_capacity(n)];
    for _ in 0..n {
        let c = rng.random_range(0..2);
        let a = rng.random_range(0..cards[0]);
        let b = if rng.random_bool(couple) { (a + c) % cards[1] } else { rng.random_range(0..cards[1]) };
        classes.push(c);
        columns[0].push(a);
        columns[1].push(b);
    }
    RandomTable { cards, classes, columns }
}

impl RandomTable {
    pub fn cube(&self) -> CountCube {
        CountCube::from_columns(&self.cards, &self.classes, &self.columns)
    }
}

/// I(A;B|C) = Σ p(a,b,c) ln[p(a,b,c) p(c) / (p(a,c) p(b,c))], straight from the rows.
pub fn cmi_triple_sum(t: &RandomTable) -> f64 {
    let n = t.classes.len() as f64;
    let (ka, kb) = (t.cards[0], t.cards[1]);
    let mut abc = vec![0.0; ka * kb * 2];
    for r in 0..t.classes.len() {
        abc[(t.columns[0][r] * kb + t.columns[1][r]) * 2 + t.classes[r]] += 1.0;
    }
    let mut total = 0.0;
    for a in 0..ka {
        for b in 0..kb {
            for c in 0..2 {
                let nabc = abc[(a * kb + b) * 2 + c];
                if nabc == 0.0 {
                    continue;
                }
                let nc: f64 =
                    (0..ka).flat_map(|x| (0..kb).map(move |y| (x, y))).map(|(x, y)| abc[(x * kb + y) * 2 + c]).sum();
                let nac: f64 = (0..kb).map(|y| abc[(a * kb + y) * 2 + c]).sum();
                let nbc: f64 = (0..ka).map(|x| abc[(x * kb + b) * 2 + c]).sum();
                total += nabc / n * ((nabc / n) * (nc / n) / ((nac / n) * (nbc / n))).ln();
            }
        }
    }
    total
}

// ---------------------------------------------------------------- scores

pub fn scored(probability: f64, positive: bool) -> ScoredCase {
    ScoredCase {
        case_index: 0,
        patient_id: String::new(),
        probability,
        positive,
        severity: if positive { OutcomeLabel::Invasive } else { OutcomeLabel::Benign },
        age_group: None,
        fold: 0,
    }
}

/// Random fixture with both classes present; scores on a coarse grid so ties occur.
pub fn random_scored(rng: &mut ChaCha8Rng, n: usize) -> Vec<ScoredCase> {
    loop {
        let out: Vec<ScoredCase> = (0..n)
            .enumerate()
            .map(|(i, _)| {
                let mut s = scored(rng.random_range(0..=20) as f64 / 20.0, rng.random_bool(0.4));
                s.case_index = i;
                s.patient_id = format!("p{i}");
                s
            })
            .collect();
        if out.iter().any(|s| s.positive) && out.iter().any(|s| !s.positive) {
            return out;
        }
    }
}

/// P(score_pos > score_neg) + ½ P(tie), over all pairs.
pub fn mann_whitney_auc(cases: &[ScoredCase]) -> f64 {
    let pos: Vec<f64> = cases.iter().filter(|s| s.positive).map(|s| s.probability).collect();
    let neg: Vec<f64> = cases.iter().filter(|s| !s.positive).map(|s| s.probability).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

// ---------------------------------------------------------------- regression

/// Everything a cubic OLS report states, computed from the normal equations.
#[derive(Debug, Clone)]
pub struct OlsOracle {
    pub b: [f64; 4],
    pub se: [f64; 4],
    pub t: [f64; 4],
    pub p: [f64; 4],
    pub model_ss: f64,
    pub error_ss: f64,
    pub total_ss: f64,
    pub error_df: usize,
    pub f: f64,
    pub f_p: f64,
    pub r_square: f64,
    pub root_mse: f64,
    pub coeff_var: f64,
    pub mean: f64,
    pub type1: [f64; 3],
    pub type3: [f64; 3],
    pub type1_f: [f64; 3],
    pub type3_f: [f64; 3],
    pub type1_p: [f64; 3],
    pub type3_p: [f64; 3],
}

/// Double-double number (hi + lo, |lo| ≤ ulp(hi)/2), enough headroom for the
/// squared condition number of a cubic normal-equation system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    fn quick(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd { hi: s, lo: b - (s - a) }
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl std::ops::Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl std::ops::Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        let t = Dd::two_sum(self.lo, o.lo);
        let s = Dd::quick(s.hi, s.lo + t.hi);
        Dd::quick(s.hi, s.lo + t.lo)
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl std::ops::Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::quick(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl std::ops::Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from(q2);
        let q3 = r.hi / o.hi;
        Dd::quick(q1, q2) + Dd::from(q3)
    }
}

impl std::iter::Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(it: I) -> Dd {
        it.fold(Dd::ZERO, |a, b| a + b)
    }
}

/// Inverse of a small square matrix by Gauss-Jordan elimination with partial pivoting.
pub fn invert(m: &[Vec<Dd>]) -> Vec<Vec<Dd>> {
    let k = m.len();
    let mut a: Vec<Vec<Dd>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..k).map(|j| if i == j { Dd::ONE } else { Dd::ZERO }));
            r
        })
        .collect();
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| a[x][col].abs().hi.total_cmp(&a[y][col].abs().hi)).unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        a[col].iter_mut().for_each(|v| *v = *v / d);
        for r in 0..k {
            if r != col {
                let factor = a[r][col];
                let pivot_row = a[col].clone();
                a[r].iter_mut().zip(&pivot_row).for_each(|(v, p)| *v = *v - factor * *p);
            }
        }
    }
    a.into_iter().map(|r| r[k..].to_vec()).collect()
}

/// Fitted values, coefficients and (XᵀX)⁻¹ of the polynomial with the first `terms` powers.
fn fitted_values(x: &[f64], y: &[f64], terms: usize) -> (Vec<Dd>, Vec<Dd>, Vec<Vec<Dd>>) {
    let row = |xi: f64| -> Vec<Dd> {
        let xi = Dd::from(xi);
        let mut r = vec![Dd::ONE; terms];
        for k in 1..terms {
            r[k] = r[k - 1] * xi;
        }
        r
    };
    let mut xtx = vec![vec![Dd::ZERO; terms]; terms];
    let mut xty = vec![Dd::ZERO; terms];
    for (&xi, &yi) in x.iter().zip(y) {
        let r = row(xi);
        for i in 0..terms {
            xty[i] = xty[i] + r[i] * Dd::from(yi);
            for j in 0..terms {
                xtx[i][j] = xtx[i][j] + r[i] * r[j];
            }
        }
    }
    let inv = invert(&xtx);
    let b: Vec<Dd> = (0..terms).map(|i| (0..terms).map(|j| inv[i][j] * xty[j]).sum()).collect();
    let yhat = x.iter().map(|&xi| row(xi).iter().zip(&b).map(|(a, c)| *a * *c).sum()).collect();
    (yhat, b, inv)
}

/// Textbook OLS quantities for the cubic, in double-double precision.
pub fn ols_oracle(x: &[f64], y: &[f64]) -> OlsOracle {
    use statrs::function::beta::beta_reg;
    let n = x.len();
    let yd: Vec<Dd> = y.iter().map(|&v| Dd::from(v)).collect();
    let mean_dd = yd.iter().copied().sum::<Dd>() / Dd::from(n as f64);
    let fits: Vec<Vec<Dd>> = (1..=4).map(|t| fitted_values(x, y, t).0).collect();
    let (yhat, bv, inv) = fitted_values(x, y, 4);
    let sq = |a: &[Dd], b: &[Dd]| a.iter().zip(b).map(|(u, v)| (*u - *v) * (*u - *v)).sum::<Dd>();
    let dev = |a: &[Dd]| a.iter().map(|v| (*v - mean_dd) * (*v - mean_dd)).sum::<Dd>();
    let error_ss = sq(&yd, &yhat).to_f64();
    let model_ss = dev(&yhat).to_f64();
    let total_ss = dev(&yd).to_f64();
    let mean = mean_dd.to_f64();
    let error_df = n - 4;
    let mse = error_ss / error_df as f64;
    let ed = error_df as f64;
    let b: [f64; 4] = std::array::from_fn(|k| bv[k].to_f64());
    let se: [f64; 4] = std::array::from_fn(|k| (inv[k][k].to_f64() * mse).sqrt());
    let t: [f64; 4] = std::array::from_fn(|k| b[k] / se[k]);
    let p: [f64; 4] = std::array::from_fn(|k| beta_reg(ed / 2.0, 0.5, ed / (ed + t[k] * t[k])));
    let type1: [f64; 3] = std::array::from_fn(|k| sq(&fits[k + 1], &fits[k]).to_f64());
    let type3: [f64; 3] = std::array::from_fn(|k| (bv[k + 1] * bv[k + 1] / inv[k + 1][k + 1]).to_f64());
    let f_of = |ss: f64| ss / mse;
    let p_of = |f: f64, d1: f64| beta_reg(ed / 2.0, d1 / 2.0, ed / (ed + d1 * f));
    let f = (model_ss / 3.0) / mse;
    OlsOracle {
        b,
        se,
        t,
        p,
        model_ss,
        error_ss,
        total_ss,
        error_df,
        f,
        f_p: p_of(f, 3.0),
        r_square: model_ss / total_ss,
        root_mse: mse.sqrt(),
        coeff_var: 100.0 * mse.sqrt() / mean,
        mean,
        type1,
        type3,
        type1_f: type1.map(f_of),
        type3_f: type3.map(f_of),
        type1_p: type1.map(|s| p_of(f_of(s), 1.0)),
        type3_p: type3.map(|s| p_of(f_of(s), 1.0)),
    }
}

/// Compare every report field to the oracle; returns the first mismatch.
pub fn compare_report(r: &tanwb_core::regression::RegressionReport, o: &OlsOracle, rel: f64) -> Result<(), String> {
    // p-values below this are compared absolutely: both sides are deep in the tail
    const P_FLOOR: f64 = 1e-250;
    let mut fields: Vec<(String, f64, f64)> = vec![
        ("model_ss".into(), r.model_ss, o.model_ss),
        ("error_ss".into(), r.error_ss, o.error_ss),
        ("total_ss".into(), r.total_ss, o.total_ss),
        ("error_ms".into(), r.error_ms, o.error_ss / o.error_df as f64),
        ("model_ms".into(), r.model_ms, o.model_ss / 3.0),
        ("f_value".into(), r.f_value.unwrap_or(f64::NAN), o.f),
        ("r_square".into(), r.r_square, o.r_square),
        ("root_mse".into(), r.root_mse, o.root_mse),
        ("coeff_var".into(), r.coeff_var.unwrap_or(f64::NAN), o.coeff_var),
        ("mean".into(), r.mean_of_response, o.mean),
    ];
    for k in 0..4 {
        let c = &r.coefficients[k];
        fields.push((format!("b{k}"), c.estimate, o.b[k]));
        fields.push((format!("se{k}"), c.std_error.unwrap_or(f64::NAN), o.se[k]));
        fields.push((format!("t{k}"), c.t_value.unwrap_or(f64::NAN), o.t[k]));
    }
    for k in 0..3 {
        fields.push((format!("type1_ss{k}"), r.type1[k].ss, o.type1[k]));
        fields.push((format!("type3_ss{k}"), r.type3[k].ss, o.type3[k]));
        fields.push((format!("type1_f{k}"), r.type1[k].f_value.unwrap_or(f64::NAN), o.type1_f[k]));
        fields.push((format!("type3_f{k}"), r.type3[k].f_value.unwrap_or(f64::NAN), o.type3_f[k]));
    }
    for (name, got, want) in fields {
        if !rel_close(got, want, rel) {
            return Err(format!("{name}: {got:e} vs oracle {want:e}"));
        }
    }
    let mut pvals: Vec<(String, Option<f64>, f64)> = vec![("f_p".into(), r.f_p_value, o.f_p)];
    for k in 0..4 {
        pvals.push((format!("p{k}"), r.coefficients[k].p_value, o.p[k]));
    }
    for k in 0..3 {
        pvals.push((format!("type1_p{k}"), r.type1[k].p_value, o.type1_p[k]));
        pvals.push((format!("type3_p{k}"), r.type3[k].p_value, o.type3_p[k]));
    }
    for (name, got, want) in pvals {
        let got = got.unwrap_or(f64::NAN);
        let ok = rel_close(got, want, rel) || (got.abs() < P_FLOOR && want.abs() < P_FLOOR);
        if !ok {
            return Err(format!("{name}: {got:e} vs oracle {want:e}"));
        }
    }
    if r.error_df != o.error_df || r.model_df != 3 || r.total_df != r.n - 1 {
        return Err("degrees of freedom".into());
    }
    Ok(())
}

/// Known cubic plus Gaussian noise on a random interval.
pub fn noisy_cubic(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>, [f64; 4]) {
    use rand_distr::{Distribution, Normal};
    let b: [f64; 4] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
    let lo: f64 = rng.random_range(-1.0..1.0);
    let width: f64 = rng.random_range(0.5..2.0);
    let noise = Normal::new(0.0, rng.random_range(0.01..0.5)).unwrap();
    let x: Vec<f64> = (0..n).map(|_| lo + width * rng.random::<f64>()).collect();
    let y = x.iter().map(|&v| b[0] + v * (b[1] + v * (b[2] + v * b[3])) + noise.sample(rng)).collect();
    (x, y, b)
}
