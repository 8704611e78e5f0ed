//! Convex decomposition of a mixed family of Lyapunov exponents into
//! pairwise combinations.
//!
//! Input: exponents `λ⁻_i < 0` and `λ⁺_j > 0` with nonnegative weights
//! summing to 1 whose mixture `λ = Σ A⁻_i λ⁻_i + Σ A⁺_j λ⁺_j` is negative.
//! Output: matrices `a_ij ∈ [0,1]` and `b_ij ≥ 0` with
//!
//! 1. every pairwise average `(1−a_ij) λ⁻_i + a_ij λ⁺_j` negative,
//! 2. `Σ_j b_ij (1−a_ij) = A⁻_i` for every `i`,
//! 3. `Σ_i b_ij a_ij = A⁺_j` for every `j`,
//!
//! and consequently `Σ_ij b_ij ((1−a_ij) λ⁻_i + a_ij λ⁺_j) = λ` with
//! `Σ b_ij = 1`. This is what lets a single period of a long orbit be split
//! into pairwise contraction/expansion blocks, each individually dominated
//! by contraction, that together realize an arbitrary mixed combination.
//!
//! The construction is fully deterministic: one aggregation of the plus
//! side, a single-plus decomposition (peeling off minus exponents that are
//! too mild, mildest first), then a single-minus decomposition per row.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for validating that weights describe a convex combination.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A mixed family of exponents and weights with negative mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DecompInputData", into = "DecompInputData")]
pub struct DecompInput {
    lambdas_minus: Vec<f64>,
    lambdas_plus: Vec<f64>,
    weights_minus: Vec<f64>,
    weights_plus: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DecompInputData {
    lambdas_minus: Vec<f64>,
    lambdas_plus: Vec<f64>,
    weights_minus: Vec<f64>,
    weights_plus: Vec<f64>,
}

impl TryFrom<DecompInputData> for DecompInput {
    type Error = Error;

    fn try_from(d: DecompInputData) -> Result<Self> {
        DecompInput::new(
            d.lambdas_minus,
            d.lambdas_plus,
            d.weights_minus,
            d.weights_plus,
        )
    }
}

impl From<DecompInput> for DecompInputData {
    fn from(i: DecompInput) -> Self {
        DecompInputData {
            lambdas_minus: i.lambdas_minus,
            lambdas_plus: i.lambdas_plus,
            weights_minus: i.weights_minus,
            weights_plus: i.weights_plus,
        }
    }
}

impl DecompInput {
    pub fn new(
        lambdas_minus: Vec<f64>,
        lambdas_plus: Vec<f64>,
        weights_minus: Vec<f64>,
        weights_plus: Vec<f64>,
    ) -> Result<Self> {
        if lambdas_minus.is_empty() || lambdas_plus.is_empty() {
            return Err(Error::invalid(
                "decomposition needs at least one exponent on each side",
            ));
        }
        if lambdas_minus.len() != weights_minus.len() || lambdas_plus.len() != weights_plus.len() {
            return Err(Error::invalid(format!(
                "exponent/weight length mismatch: {}/{} minus, {}/{} plus",
                lambdas_minus.len(),
                weights_minus.len(),
                lambdas_plus.len(),
                weights_plus.len()
            )));
        }
        for &l in &lambdas_minus {
            if !(l < 0.0) || !l.is_finite() {
                return Err(Error::invalid(format!(
                    "minus-side exponents must be negative, got {l}"
                )));
            }
        }
        for &l in &lambdas_plus {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::invalid(format!(
                    "plus-side exponents must be positive, got {l}"
                )));
            }
        }
        for &w in weights_minus.iter().chain(&weights_plus) {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::invalid(format!(
                    "weights must be nonnegative, got {w}"
                )));
            }
        }
        let total: f64 = weights_minus.iter().chain(&weights_plus).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!(
                "weights must sum to 1 within {WEIGHT_SUM_TOL:e}, got {total}"
            )));
        }
        let input = DecompInput {
            lambdas_minus,
            lambdas_plus,
            weights_minus,
            weights_plus,
        };
        let lambda = input.mixed_exponent();
        if !(lambda < 0.0) {
            return Err(Error::invalid(format!(
                "mixed exponent must be negative, got {lambda}"
            )));
        }
        Ok(input)
    }

    pub fn lambdas_minus(&self) -> &[f64] {
        &self.lambdas_minus
    }

    pub fn lambdas_plus(&self) -> &[f64] {
        &self.lambdas_plus
    }

    pub fn weights_minus(&self) -> &[f64] {
        &self.weights_minus
    }

    pub fn weights_plus(&self) -> &[f64] {
        &self.weights_plus
    }

    /// The weighted mixture `λ = Σ A⁻_i λ⁻_i + Σ A⁺_j λ⁺_j`.
    pub fn mixed_exponent(&self) -> f64 {
        let minus: f64 = self
            .lambdas_minus
            .iter()
            .zip(&self.weights_minus)
            .map(|(l, w)| l * w)
            .sum();
        let plus: f64 = self
            .lambdas_plus
            .iter()
            .zip(&self.weights_plus)
            .map(|(l, w)| l * w)
            .sum();
        minus + plus
    }
}

/// The pairwise mixing matrices produced by [`decompose`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDecomp {
    /// `a[i][j]`: share of the plus exponent inside pair `(i, j)`.
    pub a: Vec<Vec<f64>>,
    /// `b[i][j]`: weight of pair `(i, j)` in the outer combination.
    pub b: Vec<Vec<f64>>,
}

impl PairwiseDecomp {
    /// The exponent of pair `(i, j)` under the given input exponents.
    pub fn pair_exponent(&self, input: &DecompInput, i: usize, j: usize) -> f64 {
        (1.0 - self.a[i][j]) * input.lambdas_minus()[i] + self.a[i][j] * input.lambdas_plus()[j]
    }
}

fn check_negative_mixture(lambda: f64) -> Result<()> {
    if !(lambda < 0.0) {
        return Err(Error::invalid(format!(
            "mixed exponent must be negative, got {lambda}"
        )));
    }
    Ok(())
}

/// Decomposes a family with a single plus exponent: finds `a_i ∈ [0,1)` and
/// `b_i ≥ 0` with `Σ b_i = 1`, `b_i (1−a_i) = A⁻_i` and `Σ b_i a_i = A⁺`.
///
/// When every `λ⁻_i ≤ λ`, the direct formula `a_i = (λ−λ⁻_i)/(λ⁺−λ⁻_i)`
/// applies and every pairwise average equals `λ`. Exponents milder than `λ`
/// are peeled off first (mildest first, `a = 0`, keeping their own weight),
/// which strictly lowers the mixture of the remainder until the direct
/// formula applies; peeling at most `m−1` times always terminates.
pub fn decompose_single_plus(
    lambdas_minus: &[f64],
    weights_minus: &[f64],
    lambda_plus: f64,
    weight_plus: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let input = DecompInput::new(
        lambdas_minus.to_vec(),
        vec![lambda_plus],
        weights_minus.to_vec(),
        vec![weight_plus],
    )?;
    let lambda = input.mixed_exponent();
    check_negative_mixture(lambda)?;
    let m = lambdas_minus.len();

    if weight_plus == 0.0 {
        // No plus mass to distribute: every pair is its own minus exponent.
        return Ok((vec![0.0; m], weights_minus.to_vec()));
    }

    // Peel indices whose exponent exceeds the running remainder mixture.
    // Working with original weights: peeling i* replaces the mixture by
    // λ_rem = (λ − Σ_peeled A_i λ⁻_i) / (1 − Σ_peeled A_i), and the final
    // rescalings cancel so b_i = A⁻_i / (1−a_i) holds in original scale.
    let mut peeled = vec![false; m];
    let mut peeled_weight = 0.0;
    let mut peeled_mixture = 0.0;
    let mut lambda_rem = lambda;
    loop {
        let candidate = (0..m)
            .filter(|&i| !peeled[i] && lambdas_minus[i] > lambda_rem)
            .max_by(|&x, &y| lambdas_minus[x].total_cmp(&lambdas_minus[y]));
        match candidate {
            None => break,
            Some(i) => {
                peeled[i] = true;
                peeled_weight += weights_minus[i];
                peeled_mixture += weights_minus[i] * lambdas_minus[i];
                lambda_rem = (lambda - peeled_mixture) / (1.0 - peeled_weight);
            }
        }
    }

    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m];
    for i in 0..m {
        if peeled[i] {
            b[i] = weights_minus[i];
        } else {
            a[i] = (lambda_rem - lambdas_minus[i]) / (lambda_plus - lambdas_minus[i]);
            b[i] = weights_minus[i] / (1.0 - a[i]);
        }
    }
    Ok((a, b))
}

/// Decomposes a family with a single minus exponent: `a_j` is chosen so that
/// every pairwise average equals the mixture `λ` exactly, and
/// `b_j = A⁺_j / a_j`.
///
/// With zero total plus weight the split is degenerate (`λ = λ⁻`); pair
/// weights are then spread uniformly with `a = 0`.
pub fn decompose_single_minus(
    lambda_minus: f64,
    weight_minus: f64,
    lambdas_plus: &[f64],
    weights_plus: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let input = DecompInput::new(
        vec![lambda_minus],
        lambdas_plus.to_vec(),
        vec![weight_minus],
        weights_plus.to_vec(),
    )?;
    let lambda = input.mixed_exponent();
    check_negative_mixture(lambda)?;
    let n = lambdas_plus.len();

    if weights_plus.iter().all(|&w| w == 0.0) {
        return Ok((vec![0.0; n], vec![1.0 / n as f64; n]));
    }

    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for j in 0..n {
        a[j] = (lambda - lambda_minus) / (lambdas_plus[j] - lambda_minus);
        b[j] = weights_plus[j] / a[j];
    }
    Ok((a, b))
}

/// Full pairwise decomposition of a mixed family.
///
/// The plus side is aggregated to `λ⁺ = Σ A⁺_j λ⁺_j / A⁺`, a single-plus
/// decomposition fixes the row structure `(a_i, b_i)`, and each row is then
/// refined by a single-minus decomposition of the sub-family
/// `(λ⁻_i, 1−a_i; λ⁺_j, a_i A⁺_j / A⁺)`, whose mixture is exactly the row's
/// pairwise average and hence negative. Final entries are `a_ij = α_ij` and
/// `b_ij = b_i β_ij`.
pub fn decompose(input: &DecompInput) -> Result<PairwiseDecomp> {
    let lambda = input.mixed_exponent();
    check_negative_mixture(lambda)?;
    let (m, n) = (input.lambdas_minus.len(), input.lambdas_plus.len());
    let weight_plus: f64 = input.weights_plus.iter().sum();

    if weight_plus == 0.0 {
        // All mass on the minus side: put each row's weight in column 0.
        let mut b = vec![vec![0.0; n]; m];
        for (row, &w) in b.iter_mut().zip(&input.weights_minus) {
            row[0] = w;
        }
        return Ok(PairwiseDecomp {
            a: vec![vec![0.0; n]; m],
            b,
        });
    }

    let lambda_plus_agg = input
        .lambdas_plus
        .iter()
        .zip(&input.weights_plus)
        .map(|(l, w)| l * w)
        .sum::<f64>()
        / weight_plus;

    let (a_row, b_row) = decompose_single_plus(
        &input.lambdas_minus,
        &input.weights_minus,
        lambda_plus_agg,
        weight_plus,
    )?;

    let mut a = vec![vec![0.0; n]; m];
    let mut b = vec![vec![0.0; n]; m];
    for i in 0..m {
        let sub_plus: Vec<f64> = input
            .weights_plus
            .iter()
            .map(|w| a_row[i] * w / weight_plus)
            .collect();
        let (alpha, beta) = decompose_single_minus(
            input.lambdas_minus[i],
            1.0 - a_row[i],
            &input.lambdas_plus,
            &sub_plus,
        )?;
        for j in 0..n {
            a[i][j] = alpha[j];
            b[i][j] = b_row[i] * beta[j];
        }
    }
    Ok(PairwiseDecomp { a, b })
}

/// One named contract violation found by [`verify`].
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub condition: String,
    pub magnitude: f64,
}

/// Result of re-substituting a decomposition into its defining contracts.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub max_violation: f64,
    pub violations: Vec<Violation>,
    pub passed: bool,
}

/// Recomputes every contract equation for `decomp` against `input` and
/// reports each violation exceeding `tol` by name, along with the worst
/// violation magnitude overall.
pub fn verify(input: &DecompInput, decomp: &PairwiseDecomp, tol: f64) -> Result<VerifyReport> {
    let (m, n) = (input.lambdas_minus.len(), input.lambdas_plus.len());
    if decomp.a.len() != m
        || decomp.b.len() != m
        || decomp.a.iter().any(|row| row.len() != n)
        || decomp.b.iter().any(|row| row.len() != n)
    {
        return Err(Error::invalid(format!(
            "matrix shape does not match the {m}x{n} input family"
        )));
    }

    let mut max_violation: f64 = 0.0;
    let mut violations = Vec::new();
    let mut record = |condition: String, magnitude: f64| {
        max_violation = max_violation.max(magnitude);
        if magnitude > tol {
            violations.push(Violation {
                condition,
                magnitude,
            });
        }
    };

    for i in 0..m {
        for j in 0..n {
            let range = (-decomp.a[i][j])
                .max(decomp.a[i][j] - 1.0)
                .max(-decomp.b[i][j]);
            if range > 0.0 {
                record(format!("range of a/b at ({i},{j})"), range);
            }
            if decomp.b[i][j] > 0.0 {
                let pair = decomp.pair_exponent(input, i, j);
                if pair >= 0.0 {
                    record(
                        format!("pairwise average sign at ({i},{j})"),
                        pair.max(f64::MIN_POSITIVE),
                    );
                }
            }
        }
    }
    for i in 0..m {
        let row: f64 = (0..n)
            .map(|j| decomp.b[i][j] * (1.0 - decomp.a[i][j]))
            .sum();
        record(
            format!("minus weight recovery in row {i}"),
            (row - input.weights_minus[i]).abs(),
        );
    }
    for j in 0..n {
        let col: f64 = (0..m).map(|i| decomp.b[i][j] * decomp.a[i][j]).sum();
        record(
            format!("plus weight recovery in column {j}"),
            (col - input.weights_plus[j]).abs(),
        );
    }
    let b_total: f64 = decomp.b.iter().flatten().sum();
    record("total pair weight".to_string(), (b_total - 1.0).abs());
    let mixture: f64 = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| decomp.b[i][j] * decomp.pair_exponent(input, i, j))
        .sum();
    record(
        "mixture recovery".to_string(),
        (mixture - input.mixed_exponent()).abs(),
    );

    let passed = violations.is_empty();
    Ok(VerifyReport {
        max_violation,
        violations,
        passed,
    })
}
