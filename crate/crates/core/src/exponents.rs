//! Exact exponent algebra for mixed Lebesgue norms `L_{s,l}` and the scalar
//! energy-certificate recursion.
//!
//! Everything is computed in [`BigRational`]; conversion to `f64` only happens
//! in the report accessors.

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub type Q = BigRational;

/// Exact rational `p/q`.
pub fn q(p: i64, d: i64) -> Q {
    Q::new(BigInt::from(p), BigInt::from(d))
}

/// Parses `"7/4"`, `"10"`, `"1.9"` or `"-0.25"` exactly.
pub fn parse_rational(text: &str) -> Result<Q> {
    let t = text.trim();
    let bad = || Error::InvalidArgument(format!("not a rational number: {text:?}"));
    if let Some((a, b)) = t.split_once('/') {
        let num: BigInt = a.trim().parse().map_err(|_| bad())?;
        let den: BigInt = b.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(num, den));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        if !int_digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits: BigInt = format!("{int_digits}{frac}").parse().map_err(|_| bad())?;
        let den = num::pow(BigInt::from(10), frac.len());
        let v = Q::new(digits, den);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(Q::from_integer(n))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// A mixed norm `L_{s,l}` together with its scaling exponent `κ = l(3/s + 2/l − 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MixedNormSpec {
    pub s: Q,
    pub l: Q,
    pub kappa: Q,
}

impl MixedNormSpec {
    pub fn new(s: Q, l: Q) -> Result<Self> {
        if s < Q::one() || l < Q::one() {
            return Err(Error::InvalidArgument(format!("need s ≥ 1 and l ≥ 1, got ({s}, {l})")));
        }
        let kappa = &l * (q(3, 1) / &s + q(2, 1) / &l - Q::one());
        Ok(Self { s, l, kappa })
    }

    pub fn s_f64(&self) -> f64 {
        to_f64(&self.s)
    }

    pub fn l_f64(&self) -> f64 {
        to_f64(&self.l)
    }

    pub fn kappa_f64(&self) -> f64 {
        to_f64(&self.kappa)
    }

    /// `"s,l"` with each entry in lowest terms, e.g. `"7/4,10"`.
    pub fn label(&self) -> String {
        format!("{},{}", self.s, self.l)
    }
}

/// The three inequalities of the feasible triangle in `x = 1/s`, `y = 1/l`.
pub fn feasible_e7(x: &Q, y: &Q) -> bool {
    let two = q(2, 1);
    let three = q(3, 1);
    (x + y) >= q(2, 3) && (&two * x + y) >= Q::one() && (&three * x + &two * y) < two
}

/// Admissibility of `(s, l)` for the interpolation inequality:
/// `3/s + 2/l − 3/2 ≥ max{1/2 − 1/s, 1/s − 1/6}`.
pub fn admissible_as3(s: &Q, l: &Q) -> bool {
    let x = s.recip();
    let y = l.recip();
    let d = q(3, 1) * &x + q(2, 1) * &y - q(3, 2);
    let a = q(1, 2) - &x;
    let b = &x - q(1, 6);
    d >= a.max(b)
}

/// Values printed in the source for the two specs used there.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedConstants {
    pub m: Q,
    pub mu: Q,
}

fn published(s: &Q, l: &Q) -> Option<PublishedConstants> {
    if *s == q(7, 4) && *l == q(10, 1) {
        Some(PublishedConstants { m: q(58, 7), mu: q(1, 58) })
    } else if *s == q(4, 1) && *l == q(12, 7) {
        Some(PublishedConstants { m: q(10, 7), mu: q(3, 14) })
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    pub spec: MixedNormSpec,
    pub m: Q,
    pub mu: Q,
    pub alpha1: Q,
    pub alpha2: Q,
    pub alpha3: Q,
    pub admissible_as3: bool,
    pub feasible_e7: bool,
    /// Published `(m, μ)` for this spec, when the source lists them.
    pub published: Option<PublishedConstants>,
    /// Set when a published value differs from the formula value.
    pub discrepancy: Option<String>,
}

impl ExponentReport {
    pub fn alphas(&self) -> [Q; 3] {
        [self.alpha1.clone(), self.alpha2.clone(), self.alpha3.clone()]
    }

    pub fn to_json(&self) -> Value {
        let r = |x: &Q| json!({ "exact": x.to_string(), "value": to_f64(x) });
        json!({
            "s": r(&self.spec.s),
            "l": r(&self.spec.l),
            "kappa": r(&self.spec.kappa),
            "m": r(&self.m),
            "mu": r(&self.mu),
            "alpha1": r(&self.alpha1),
            "alpha2": r(&self.alpha2),
            "alpha3": r(&self.alpha3),
            "admissible_as3": self.admissible_as3,
            "feasible_e7": self.feasible_e7,
            "bootstrap_closes": heuristic_bootstrap_check(&self.alphas(), &self.spec.s, &self.spec.l),
            "published": self.published.as_ref().map(|p| json!({ "m": r(&p.m), "mu": r(&p.mu) })),
            "discrepancy": self.discrepancy,
        })
    }
}

/// All exponents attached to `(s, l)`:
///
/// ```text
/// D  = 3/s + 2/l − 3/2
/// m  = 2l·D,  μ = (l/m)(3/s + 3/l − 2)
/// α₁ = (1/s + 1/l − 2/3)/D,  α₂ = (2/s + 1/l − 1)/D,  α₃ = 1/(6D)
/// ```
pub fn exponent_report(s: &Q, l: &Q) -> Result<ExponentReport> {
    let spec = MixedNormSpec::new(s.clone(), l.clone())?;
    let x = s.recip();
    let y = l.recip();
    let d = q(3, 1) * &x + q(2, 1) * &y - q(3, 2);
    if d.is_zero() {
        return Err(Error::DegenerateExponent(format!(
            "3/s + 2/l = 3/2 at (s, l) = ({s}, {l})"
        )));
    }
    let m = q(2, 1) * l * &d;
    let mu = (l / &m) * (q(3, 1) * &x + q(3, 1) * &y - q(2, 1));
    let alpha1 = (&x + &y - q(2, 3)) / &d;
    let alpha2 = (q(2, 1) * &x + &y - Q::one()) / &d;
    let alpha3 = (q(6, 1) * &d).recip();
    let pub_c = published(s, l);
    let discrepancy = pub_c.as_ref().and_then(|p| {
        let mut parts = Vec::new();
        if p.m != m {
            parts.push(format!("m: published {} vs formula {}", p.m, m));
        }
        if p.mu != mu {
            parts.push(format!("mu: published {} vs formula {}", p.mu, mu));
        }
        (!parts.is_empty()).then(|| parts.join("; "))
    });
    Ok(ExponentReport {
        admissible_as3: admissible_as3(s, l),
        feasible_e7: feasible_e7(&x, &y),
        spec,
        m,
        mu,
        alpha1,
        alpha2,
        alpha3,
        published: pub_c,
        discrepancy,
    })
}

/// True iff `α₁ + α₂ < 2/3`, the condition under which the heuristic
/// bootstrap closes without a smallness assumption.
pub fn heuristic_bootstrap_check(alphas: &[Q; 3], _s: &Q, _l: &Q) -> bool {
    &alphas[0] + &alphas[1] < q(2, 3)
}

/// Solves the Hölder exponent system in dimension `n ≥ 3` by exact Gaussian
/// elimination:
///
/// ```text
/// α₁ + α₂ + α₃ = 1
/// α₁/2 + α₂/2* + α₃/s = 1/3,    1/2* = 1/2 − 1/n
/// α₂/2 + α₃/l = 1/3
/// ```
///
/// Returns `None` when the system is singular.
pub fn holder_system_solve(s: &Q, l: &Q, n: u32) -> Option<[Q; 3]> {
    let inv_2star = q(1, 2) - q(1, n as i64);
    let mut a = [
        [Q::one(), Q::one(), Q::one(), Q::one()],
        [q(1, 2), inv_2star, s.recip(), q(1, 3)],
        [Q::zero(), q(1, 2), l.recip(), q(1, 3)],
    ];
    for col in 0..3 {
        let piv = (col..3).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        let p = a[col][col].clone();
        for k in col..4 {
            a[col][k] = &a[col][k] / &p;
        }
        for r in 0..3 {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for k in col..4 {
                    let sub = &f * &a[col][k];
                    a[r][k] -= sub;
                }
            }
        }
    }
    Some([a[0][3].clone(), a[1][3].clone(), a[2][3].clone()])
}

/// One raster point `(x, y) = (1/s, 1/l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub x: Q,
    pub y: Q,
    pub feasible: bool,
    pub admissible_as3: bool,
    /// `None` on the degenerate line `3x + 2y = 3/2`.
    pub alphas: Option<[Q; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityScan {
    pub resolution: usize,
    pub points: Vec<ScanPoint>,
}

impl FeasibilityScan {
    pub fn feasible_count(&self) -> usize {
        self.points.iter().filter(|p| p.feasible).count()
    }

    /// Whether some feasible point has `l < 2` and `s > 1`.
    pub fn has_l_below_two(&self) -> bool {
        self.points
            .iter()
            .any(|p| p.feasible && p.y > q(1, 2) && p.x < Q::one())
    }

    /// CSV with header `x,y,feasible,alpha1,alpha2,alpha3`; degenerate alphas are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,feasible,alpha1,alpha2,alpha3\n");
        for p in &self.points {
            let al = match &p.alphas {
                Some(a) => a.iter().map(|v| format!("{:.16e}", to_f64(v))).collect::<Vec<_>>().join(","),
                None => ",,".into(),
            };
            out.push_str(&format!(
                "{:.16e},{:.16e},{},{}\n",
                to_f64(&p.x),
                to_f64(&p.y),
                p.feasible as u8,
                al
            ));
        }
        out
    }
}

/// Rasterises `]0, 1]²` at `x = i/n`, `y = j/n` (`i, j = 1..=n`).
pub fn scan_feasible_region(resolution: usize) -> Result<FeasibilityScan> {
    if resolution < 8 {
        return Err(Error::InvalidArgument(format!("resolution must be ≥ 8, got {resolution}")));
    }
    let n = resolution as i64;
    let mut points = Vec::with_capacity(resolution * resolution);
    for i in 1..=n {
        for j in 1..=n {
            let x = q(i, n);
            let y = q(j, n);
            let (s, l) = (x.recip(), y.recip());
            let alphas = exponent_report(&s, &l).ok().map(|r| r.alphas());
            points.push(ScanPoint {
                feasible: feasible_e7(&x, &y),
                admissible_as3: admissible_as3(&s, &l),
                x,
                y,
                alphas,
            });
        }
    }
    Ok(FeasibilityScan { resolution, points })
}

/// Trace of `x_{k+1} = c(θ + ε/θ²) x_k + additive`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateTrace {
    pub c: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub contraction: f64,
    pub additive: f64,
    pub sequence: Vec<f64>,
    pub bounded: bool,
    /// `additive / (1 − contraction)` when bounded.
    pub bound: Option<f64>,
}

pub fn certificate_iteration(e0: f64, contraction_inputs: (f64, f64, f64), additive: f64, steps: usize) -> Result<CertificateTrace> {
    let (c, theta, epsilon) = contraction_inputs;
    for (name, v) in [("E0", e0), ("c", c), ("epsilon", epsilon), ("additive", additive)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be finite and ≥ 0, got {v}")));
        }
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be ≥ 1".into()));
    }
    let contraction = c * (theta + epsilon / (theta * theta));
    let mut sequence = Vec::with_capacity(steps + 1);
    let mut x = e0;
    sequence.push(x);
    for _ in 0..steps {
        x = contraction * x + additive;
        sequence.push(x);
    }
    let bounded = contraction < 1.0;
    Ok(CertificateTrace {
        c,
        theta,
        epsilon,
        contraction,
        additive,
        sequence,
        bounded,
        bound: bounded.then(|| additive / (1.0 - contraction)),
    })
}

/// `(θ, ε)` with `cθ = margin/4` and `cε/θ² = margin/4`, so both quarter
/// conditions hold for `margin ∈ ]0, 1[` and the contraction equals `margin/2`.
pub fn quarter_parameters(c: f64, margin: f64) -> Result<(f64, f64)> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidArgument(format!("margin must lie in ]0, 1[, got {margin}")));
    }
    let theta = margin / (4.0 * c);
    let epsilon = margin * theta * theta / (4.0 * c);
    Ok((theta, epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::Signed;
    use proptest::prelude::*;

    #[test]
    fn published_constants_and_discrepancy() {
        let r = exponent_report(&q(7, 4), &q(10, 1)).unwrap();
        assert_eq!(r.m, q(58, 7));
        assert_eq!(r.mu, q(1, 58));
        assert_eq!(r.alphas(), [q(1, 87), q(17, 29), q(35, 87)]);
        assert!(r.discrepancy.is_none());
        let r = exponent_report(&q(4, 1), &q(12, 7)).unwrap();
        assert_eq!(r.m, q(10, 7));
        assert_eq!(r.mu, q(3, 5));
        assert_eq!(r.published.as_ref().unwrap().mu, q(3, 14));
        assert!(r.discrepancy.as_ref().unwrap().contains("3/14"));
    }

    #[test]
    fn l3_interpolates_itself() {
        let r = exponent_report(&q(3, 1), &q(3, 1)).unwrap();
        assert_eq!(r.alphas(), [q(0, 1), q(0, 1), q(1, 1)]);
        assert_eq!(r.spec.kappa, q(2, 1));
        assert_eq!(r.m, q(1, 1));
        assert_eq!(r.mu, q(0, 1));
        assert!(r.feasible_e7 && r.admissible_as3);
    }

    #[test]
    fn l2_is_infeasible() {
        let r = exponent_report(&q(2, 1), &q(2, 1)).unwrap();
        assert!(!r.feasible_e7);
        assert!(r.admissible_as3);
    }

    #[test]
    fn degenerate_denominator() {
        // 3/s + 2/l = 3/2 at s = 4, l = 8/3.
        assert!(matches!(exponent_report(&q(4, 1), &q(8, 3)), Err(Error::DegenerateExponent(_))));
    }

    #[test]
    fn rejects_small_exponents() {
        assert!(exponent_report(&q(1, 2), &q(3, 1)).is_err());
    }

    #[test]
    fn feasible_point_with_l_below_two() {
        assert!(feasible_e7(&q(1, 4), &q(10, 19)));
        assert!(feasible_e7(&q(1, 3), &q(1, 3)));
        assert!(!feasible_e7(&q(1, 2), &q(1, 2)));
        let scan = scan_feasible_region(64).unwrap();
        assert_eq!(scan.points.len(), 64 * 64);
        assert!(scan.feasible_count() > 0);
        assert!(scan.has_l_below_two());
        assert!(scan_feasible_region(4).is_err());
    }

    #[test]
    fn bootstrap_check_examples() {
        let r = exponent_report(&q(7, 4), &q(10, 1)).unwrap();
        assert_eq!(&r.alpha1 + &r.alpha2, q(52, 87));
        assert!(heuristic_bootstrap_check(&r.alphas(), &r.spec.s, &r.spec.l));
        let r = exponent_report(&q(3, 1), &q(3, 1)).unwrap();
        assert!(heuristic_bootstrap_check(&r.alphas(), &r.spec.s, &r.spec.l));
        // 3/s + 2/l = 3 > 2.
        let r = exponent_report(&q(2, 1), &q(4, 3)).unwrap();
        assert!(!heuristic_bootstrap_check(&r.alphas(), &r.spec.s, &r.spec.l));
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("7/4").unwrap(), q(7, 4));
        assert_eq!(parse_rational(" 10 ").unwrap(), q(10, 1));
        assert_eq!(parse_rational("1.9").unwrap(), q(19, 10));
        assert_eq!(parse_rational("-0.25").unwrap(), q(-1, 4));
        for bad in ["", "1/0", "x", "1.", "1.2.3"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn certificate_examples() {
        // c(θ + ε/θ²) = 1·(1/4 + 1/4) = 1/2.
        let t = certificate_iteration(10.0, (1.0, 0.25, 1.0 / 64.0), 1.0, 60).unwrap();
        assert_eq!(&t.sequence[..5], &[10.0, 6.0, 4.0, 3.0, 2.5]);
        assert_eq!(t.bound, Some(2.0));
        assert!((t.sequence.last().unwrap() - 2.0).abs() < 1e-12);
        let t = certificate_iteration(10.0, (1.0, 0.25, 1.0 / 64.0), 0.0, 80).unwrap();
        assert!(*t.sequence.last().unwrap() < 1e-20);
        let t = certificate_iteration(1.0, (4.0, 0.5, 0.0), 1.0, 5).unwrap();
        assert!(!t.bounded && t.bound.is_none());
        assert!(certificate_iteration(-1.0, (1.0, 0.1, 0.0), 1.0, 3).is_err());
    }

    fn small_rational() -> impl Strategy<Value = Q> {
        (1i64..=64, 1i64..=64).prop_map(|(a, b)| q(a, b))
    }

    proptest! {
        #[test]
        fn closed_form_matches_linear_solve(x in small_rational(), y in small_rational()) {
            prop_assume!(x <= Q::one() && y <= Q::one());
            let (s, l) = (x.recip(), y.recip());
            if let Ok(r) = exponent_report(&s, &l) {
                prop_assert_eq!(&r.alpha1 + &r.alpha2 + &r.alpha3, Q::one());
                prop_assert_eq!(holder_system_solve(&s, &l, 3).unwrap(), r.alphas());
                let by_alpha = !r.alpha1.is_negative() && !r.alpha2.is_negative() && r.alpha3 > q(1, 3);
                prop_assert_eq!(r.feasible_e7, by_alpha);
            }
        }

        #[test]
        fn quarter_parameters_contract_by_half(c in 0.01f64..100.0, margin in 0.01f64..0.99) {
            let (theta, eps) = quarter_parameters(c, margin).unwrap();
            prop_assert!(c * theta < 0.25);
            prop_assert!(c * eps / (theta * theta) < 0.25);
            let t = certificate_iteration(5.0, (c, theta, eps), 1.5, 10).unwrap();
            prop_assert!(t.contraction <= 0.5);
            prop_assert!(t.bounded);
            prop_assert!(t.sequence.iter().all(|v| *v >= 0.0));
        }
    }
}
