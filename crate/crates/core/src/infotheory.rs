//! Entropy and transmission measures, plus the expected information of a message.
//!
//! Everything is in bits (base-2 logarithms) except where a name says
//! `mbits`: those values are millibits, exactly `1000 ×` the bit value.
//! The conventions `0 · log 0 = 0` and `0 · log(0/0) = 0` apply throughout.

use crate::error::{Error, Result};
use crate::num::{compensated_sum, plog2p, Scalar};

pub const MILLIBITS_PER_BIT: f64 = 1000.0;

pub fn to_millibits<F: Scalar>(bits: F) -> F {
    bits * F::of(MILLIBITS_PER_BIT)
}

fn check_probabilities<F: Scalar>(probs: &[F]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution("empty support".into()));
    }
    if let Some((i, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < F::zero())
    {
        return Err(Error::InvalidDistribution(format!(
            "cell {i} has probability {p}"
        )));
    }
    let total = compensated_sum(probs.iter().copied());
    if (total - F::one()).abs() > F::normalization_tolerance() {
        return Err(Error::InvalidDistribution(format!("sums to {total}")));
    }
    Ok(())
}

fn normalize<F: Scalar>(weights: &[F]) -> Result<Vec<F>> {
    if let Some((i, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !w.is_finite() || **w < F::zero())
    {
        return Err(Error::InvalidDistribution(format!("cell {i} has weight {w}")));
    }
    let total = compensated_sum(weights.iter().copied());
    if total <= F::zero() {
        return Err(Error::InvalidDistribution("weights sum to zero".into()));
    }
    Ok(weights.iter().map(|&w| w / total).collect())
}

/// A probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<F> {
    probs: Vec<F>,
}

impl<F: Scalar> Distribution<F> {
    pub fn new(probs: Vec<F>) -> Result<Self> {
        check_probabilities(&probs)?;
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights (counts) into a distribution.
    pub fn from_weights(weights: &[F]) -> Result<Self> {
        Ok(Self {
            probs: normalize(weights)?,
        })
    }

    /// Additive smoothing: `(c_i + α) / (Σc + kα)`.
    pub fn smoothed(counts: &[F], alpha: F) -> Result<Self> {
        if alpha.is_nan() || alpha < F::zero() {
            return Err(Error::InvalidDistribution(format!(
                "smoothing alpha {alpha} is negative"
            )));
        }
        let shifted: Vec<F> = counts.iter().map(|&c| c + alpha).collect();
        Self::from_weights(&shifted)
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Joint distribution over `X × Y`, stored row-major with X along rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint2<F> {
    rows: usize,
    cols: usize,
    probs: Vec<F>,
}

impl<F: Scalar> Joint2<F> {
    pub fn new(rows: usize, cols: usize, probs: Vec<F>) -> Result<Self> {
        if rows * cols != probs.len() || rows == 0 || cols == 0 {
            return Err(Error::InvalidDistribution(format!(
                "{rows}×{cols} joint given {} cells",
                probs.len()
            )));
        }
        check_probabilities(&probs)?;
        Ok(Self { rows, cols, probs })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidDistribution("ragged joint".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_counts(rows: &[Vec<F>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidDistribution("ragged joint".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            probs: normalize(&rows.concat())?,
        })
    }

    /// Product of two marginals.
    pub fn product(x: &Distribution<F>, y: &Distribution<F>) -> Self {
        let probs = x
            .probs()
            .iter()
            .flat_map(|&px| y.probs().iter().map(move |&py| px * py))
            .collect();
        Self {
            rows: x.len(),
            cols: y.len(),
            probs,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> F {
        self.probs[x * self.cols + y]
    }

    pub fn marginal_x(&self) -> Vec<F> {
        (0..self.rows)
            .map(|x| compensated_sum((0..self.cols).map(|y| self.get(x, y))))
            .collect()
    }

    pub fn marginal_y(&self) -> Vec<F> {
        (0..self.cols)
            .map(|y| compensated_sum((0..self.rows).map(|x| self.get(x, y))))
            .collect()
    }

    pub fn joint_entropy(&self) -> F {
        entropy_of(&self.probs)
    }
}

/// `−Σ p log2 p` over raw probabilities.
fn entropy_of<F: Scalar>(probs: &[F]) -> F {
    -compensated_sum(probs.iter().map(|&p| plog2p(p)))
}

/// Shannon entropy in bits.
pub fn entropy<F: Scalar>(d: &Distribution<F>) -> F {
    entropy_of(d.probs())
}

/// `H(X|Y) = H(XY) − H(Y)`.
pub fn conditional_entropy<F: Scalar>(j: &Joint2<F>) -> F {
    j.joint_entropy() - entropy_of(&j.marginal_y())
}

/// Mutual information `T(XY) = H(X) + H(Y) − H(XY)`.
pub fn transmission2<F: Scalar>(j: &Joint2<F>) -> F {
    let t = entropy_of(&j.marginal_x()) + entropy_of(&j.marginal_y()) - j.joint_entropy();
    // rounding can push an independent joint a hair below zero
    t.max(F::zero())
}

/// 2×2×2 counts indexed by sector presence `(u, i, g)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ContingencyCube {
    counts: [u64; 8],
}

impl ContingencyCube {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cell index of a presence triple; `u` is the most significant bit.
    pub fn index(u: bool, i: bool, g: bool) -> usize {
        (usize::from(u) << 2) | (usize::from(i) << 1) | usize::from(g)
    }

    pub fn from_cells(counts: [u64; 8]) -> Self {
        Self { counts }
    }

    pub fn get(&self, u: bool, i: bool, g: bool) -> u64 {
        self.counts[Self::index(u, i, g)]
    }

    pub fn set(&mut self, u: bool, i: bool, g: bool, count: u64) {
        self.counts[Self::index(u, i, g)] = count;
    }

    pub fn add(&mut self, u: bool, i: bool, g: bool, count: u64) {
        self.counts[Self::index(u, i, g)] += count;
    }

    pub fn cells(&self) -> &[u64; 8] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn scaled(&self, factor: u64) -> Self {
        Self {
            counts: self.counts.map(|c| c * factor),
        }
    }

    /// Cell frequencies `counts / n`.
    pub fn probabilities<F: Scalar>(&self) -> Result<[F; 8]> {
        let n = self.n();
        if n == 0 {
            return Err(Error::EmptyCube);
        }
        let n = F::of_u64(n);
        Ok(self.counts.map(|c| F::of_u64(c) / n))
    }
}

/// Marginal probabilities of a cube over the axes kept by `mask` (bit 2 = u,
/// bit 1 = i, bit 0 = g). Result is indexed by the full cell index with the
/// dropped axes zeroed.
fn marginal<F: Scalar>(p: &[F; 8], mask: usize) -> [F; 8] {
    let mut out = [F::zero(); 8];
    let mut parts: [Vec<F>; 8] = Default::default();
    for (cell, &pc) in p.iter().enumerate() {
        parts[cell & mask].push(pc);
    }
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = compensated_sum(part);
    }
    out
}

const U: usize = 0b100;
const I: usize = 0b010;
const G: usize = 0b001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionReport<F> {
    pub n: u64,
    pub h_u: F,
    pub h_i: F,
    pub h_g: F,
    pub h_ui: F,
    pub h_ug: F,
    pub h_ig: F,
    pub h_uig: F,
    pub t_ui: F,
    pub t_ug: F,
    pub t_ig: F,
    pub t_uig_mbits: F,
}

impl<F: Scalar> TransmissionReport<F> {
    pub fn t_uig_bits(&self) -> F {
        self.t_uig_mbits / F::of(MILLIBITS_PER_BIT)
    }
}

/// `[H(u), H(i), H(g), H(ui), H(ug), H(ig), H(uig)]` of cell probabilities.
fn cube_entropies<F: Scalar>(p: &[F; 8]) -> [F; 7] {
    let h = |mask: usize| -> F {
        let m = marginal(p, mask);
        let cells: Vec<F> = (0..8).filter(|c| c & !mask == 0).map(|c| m[c]).collect();
        entropy_of(&cells)
    };
    [h(U), h(I), h(G), h(U | I), h(U | G), h(I | G), entropy_of(p)]
}

/// Signed trilateral transmission in bits of cell probabilities indexed as
/// in [`ContingencyCube`], by the Shannon-notation identity.
pub fn trilateral_bits<F: Scalar>(p: &[F; 8]) -> F {
    let [h_u, h_i, h_g, h_ui, h_ug, h_ig, h_uig] = cube_entropies(p);
    compensated_sum([h_u, h_i, h_g, -h_ui, -h_ug, -h_ig, h_uig])
}

/// Three-dimensional transmission via the ratio form
/// `Σ P(xyz) log2 [P(xy)P(xz)P(yz) / (P(x)P(y)P(z)P(xyz))]`.
pub fn transmission3_ratio_form<F: Scalar>(cube: &ContingencyCube) -> Result<F> {
    let p = cube.probabilities::<F>()?;
    let pu = marginal(&p, U);
    let pi = marginal(&p, I);
    let pg = marginal(&p, G);
    let pui = marginal(&p, U | I);
    let pug = marginal(&p, U | G);
    let pig = marginal(&p, I | G);
    Ok(compensated_sum(p.iter().enumerate().map(|(c, &pc)| {
        if pc > F::zero() {
            let num = pui[c & (U | I)] * pug[c & (U | G)] * pig[c & (I | G)];
            let den = pu[c & U] * pi[c & I] * pg[c & G] * pc;
            pc * (num / den).log2()
        } else {
            F::zero()
        }
    })))
}

/// Entropies and transmissions of a cube, with the signed trilateral value
/// in millibits. The Shannon-notation value is checked
/// against [`transmission3_ratio_form`] before returning.
pub fn transmission3<F: Scalar>(cube: &ContingencyCube) -> Result<TransmissionReport<F>> {
    let p = cube.probabilities::<F>()?;
    let [h_u, h_i, h_g, h_ui, h_ug, h_ig, h_uig] = cube_entropies(&p);
    let t_bits = compensated_sum([h_u, h_i, h_g, -h_ui, -h_ug, -h_ig, h_uig]);
    let ratio = transmission3_ratio_form::<F>(cube)?;
    let diff = (t_bits - ratio).abs();
    if diff > F::agreement_tolerance() {
        return Err(Error::FormulaDisagreement {
            diff: diff.to_f64().unwrap_or(f64::NAN),
        });
    }

    let pair = |a: F, b: F, ab: F| (a + b - ab).max(F::zero());
    Ok(TransmissionReport {
        n: cube.n(),
        h_u,
        h_i,
        h_g,
        h_ui,
        h_ug,
        h_ig,
        h_uig,
        t_ui: pair(h_u, h_i, h_ui),
        t_ug: pair(h_u, h_g, h_ug),
        t_ig: pair(h_i, h_g, h_ig),
        t_uig_mbits: to_millibits(t_bits),
    })
}

/// Expected information of the message that turns `predicted` into
/// `observed`, `Σ q log2(q/p)`, in millibits.
pub fn expected_info<F: Scalar>(observed: &Distribution<F>, predicted: &Distribution<F>) -> Result<F> {
    if observed.len() != predicted.len() {
        return Err(Error::SupportMismatch {
            observed: observed.len(),
            predicted: predicted.len(),
        });
    }
    let mut terms = Vec::with_capacity(observed.len());
    for (cell, (&q, &p)) in observed.probs().iter().zip(predicted.probs()).enumerate() {
        if q > F::zero() {
            if p <= F::zero() {
                return Err(Error::Divergent { cell });
            }
            terms.push(q * (q / p).log2());
        }
    }
    // the sum is non-negative in exact arithmetic
    Ok(to_millibits(compensated_sum(terms).max(F::zero())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(p: &[f64]) -> Distribution<f64> {
        Distribution::new(p.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&d(&[0.5, 0.5])), 1.0);
        assert_eq!(entropy(&d(&[1.0, 0.0])), 0.0);
        // −(¼·log2 ¼ + ¾·log2 ¾) = ½ + ¾·(2 − log2 3)
        let oracle = 0.5 + 0.75 * (2.0 - 3f64.log2());
        close(entropy(&d(&[0.25, 0.75])), oracle, 1e-15);
        close(oracle, 0.811278, 1e-6);
    }

    #[test]
    fn invalid_distributions_are_rejected() {
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::<f64>::new(vec![]).is_err());
        assert!(Distribution::from_weights(&[0.0, 0.0]).is_err());
        assert!(Joint2::new(2, 2, vec![0.25; 3]).is_err());
    }

    #[test]
    fn conditional_entropy_examples() {
        let coin = d(&[0.5, 0.5]);
        let product = Joint2::product(&coin, &coin);
        close(conditional_entropy(&product), 1.0, 1e-15);
        let diagonal = Joint2::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        close(conditional_entropy(&diagonal), 0.0, 1e-15);
        let j = Joint2::from_rows(&[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        // H(XY) − H(Y) with H(Y) = 1
        let hxy = -(2.0 * 0.4 * 0.4f64.log2() + 2.0 * 0.1 * 0.1f64.log2());
        close(conditional_entropy(&j), hxy - 1.0, 1e-15);
        close(conditional_entropy(&j), 0.721928, 1e-6);
    }

    #[test]
    fn transmission2_examples() {
        let a = d(&[0.3, 0.7]);
        let b = d(&[0.2, 0.5, 0.3]);
        close(transmission2(&Joint2::product(&a, &b)), 0.0, 1e-15);
        let diagonal = Joint2::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        close(transmission2(&diagonal), 1.0, 1e-15);
        let j = Joint2::from_rows(&[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        close(transmission2(&j), 0.278072, 1e-6);
    }

    #[test]
    fn transmission3_needs_observations() {
        assert!(matches!(
            transmission3::<f64>(&ContingencyCube::new()),
            Err(Error::EmptyCube)
        ));
    }

    #[test]
    fn transmission3_regimes() {
        let uniform = ContingencyCube::from_cells([125; 8]);
        close(transmission3::<f64>(&uniform).unwrap().t_uig_mbits, 0.0, 1e-9);

        let mut coordinated = ContingencyCube::new();
        coordinated.set(false, false, false, 50);
        coordinated.set(true, true, true, 50);
        close(transmission3::<f64>(&coordinated).unwrap().t_uig_mbits, 1000.0, 1e-9);

        let mut xor = ContingencyCube::new();
        for (u, i, g) in [(false, false, false), (false, true, true), (true, false, true), (true, true, false)] {
            xor.set(u, i, g, 25);
        }
        let r = transmission3::<f64>(&xor).unwrap();
        close(r.t_uig_mbits, -1000.0, 1e-9);
        // pairwise independent: every bilateral transmission vanishes
        close(r.t_ui + r.t_ug + r.t_ig, 0.0, 1e-12);
    }

    #[test]
    fn single_cell_cube_has_no_information() {
        let mut c = ContingencyCube::new();
        c.set(true, false, false, 7);
        let r = transmission3::<f64>(&c).unwrap();
        assert_eq!(r.h_uig, 0.0);
        assert_eq!(r.t_uig_mbits, 0.0);
    }

    #[test]
    fn expected_info_examples() {
        let p = d(&[0.2, 0.3, 0.5]);
        assert_eq!(expected_info(&p, &p).unwrap(), 0.0);
        close(expected_info(&d(&[1.0, 0.0]), &d(&[0.5, 0.5])).unwrap(), 1000.0, 1e-12);
        let oracle = 1000.0 * (0.6 * (1.2f64).log2() + 0.4 * (0.8f64).log2());
        let got = expected_info(&d(&[0.6, 0.4]), &d(&[0.5, 0.5])).unwrap();
        close(got, oracle, 1e-12);
        close(got, 29.049, 1e-3);
    }

    #[test]
    fn expected_info_errors() {
        assert!(matches!(
            expected_info(&d(&[0.5, 0.5]), &d(&[1.0])),
            Err(Error::SupportMismatch { .. })
        ));
        assert!(matches!(
            expected_info(&d(&[0.5, 0.5]), &d(&[1.0, 0.0])),
            Err(Error::Divergent { cell: 1 })
        ));
        // observed zero mass on a predicted-zero cell is fine
        assert_eq!(expected_info(&d(&[1.0, 0.0]), &d(&[1.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn smoothing_removes_divergence() {
        let predicted = Distribution::smoothed(&[4.0, 0.0], 0.5).unwrap();
        assert_eq!(predicted.probs(), &[0.9, 0.1]);
        assert!(expected_info(&d(&[0.5, 0.5]), &predicted).unwrap() > 0.0);
        assert!(Distribution::smoothed(&[1.0, 1.0], -0.1).is_err());
    }

    #[test]
    fn single_precision_agrees_with_double() {
        let cube = ContingencyCube::from_cells([0, 113617, 15412, 4359, 412733, 108919, 16270, 5201]);
        let wide = transmission3::<f64>(&cube).unwrap();
        let narrow = transmission3::<f32>(&cube).unwrap();
        assert!((f64::from(narrow.t_uig_mbits) - wide.t_uig_mbits).abs() < 0.5);
    }
}
