//! Black-Scholes valuation with a continuous carry yield, analytic greeks and
//! implied-volatility inversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{norm_cdf, norm_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    /// +1 for calls, -1 for puts.
    pub fn sign(self) -> f64 {
        match self {
            OptionKind::Call => 1.0,
            OptionKind::Put => -1.0,
        }
    }

    pub fn payoff(self, spot: f64, strike: f64) -> f64 {
        (self.sign() * (spot - strike)).max(0.0)
    }

    pub fn code(self) -> char {
        match self {
            OptionKind::Call => 'C',
            OptionKind::Put => 'P',
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "C" | "c" | "CE" | "call" => Some(OptionKind::Call),
            "P" | "p" | "PE" | "put" => Some(OptionKind::Put),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsInputs {
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub carry_yield: f64,
    pub vol: f64,
    /// Years, ACT/365.
    pub tenor: f64,
    pub kind: OptionKind,
}

impl BsInputs {
    pub fn with_vol(self, vol: f64) -> Self {
        Self { vol, ..self }
    }

    pub fn with_spot(self, spot: f64) -> Self {
        Self { spot, ..self }
    }

    pub fn with_tenor(self, tenor: f64) -> Self {
        Self { tenor, ..self }
    }

    fn validate(&self) -> Result<()> {
        let all_finite = [
            self.spot,
            self.strike,
            self.rate,
            self.carry_yield,
            self.vol,
            self.tenor,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput(format!("non-finite pricing input {self:?}")));
        }
        if self.spot <= 0.0 || self.strike < 0.0 || self.tenor < 0.0 || self.vol < 0.0 {
            return Err(Error::InvalidInput(format!(
                "pricing input out of domain {self:?}"
            )));
        }
        Ok(())
    }

    fn disc_spot(&self) -> f64 {
        self.spot * (-self.carry_yield * self.tenor).exp()
    }

    fn disc_strike(&self) -> f64 {
        self.strike * (-self.rate * self.tenor).exp()
    }

    /// Intrinsic value of the discounted forward.
    pub fn intrinsic(&self) -> f64 {
        (self.kind.sign() * (self.disc_spot() - self.disc_strike())).max(0.0)
    }

    fn is_degenerate(&self) -> bool {
        self.tenor == 0.0 || self.vol == 0.0
    }

    fn d1_d2(&self) -> (f64, f64) {
        let sd = self.vol * self.tenor.sqrt();
        let d1 = ((self.spot / self.strike).ln()
            + (self.rate - self.carry_yield + 0.5 * self.vol * self.vol) * self.tenor)
            / sd;
        (d1, d1 - sd)
    }
}

/// Sensitivities with respect to spot, vol (per unit vol) and calendar time
/// (theta per year; divide by 365 for a one-day decay).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Greeks {
    pub delta: f64,
    pub gamma: f64,
    pub vega: f64,
    pub volga: f64,
    pub theta: f64,
}

impl Greeks {
    pub fn scaled(self, w: f64) -> Self {
        Self {
            delta: w * self.delta,
            gamma: w * self.gamma,
            vega: w * self.vega,
            volga: w * self.volga,
            theta: w * self.theta,
        }
    }

    pub fn add(self, o: Self) -> Self {
        Self {
            delta: self.delta + o.delta,
            gamma: self.gamma + o.gamma,
            vega: self.vega + o.vega,
            volga: self.volga + o.volga,
            theta: self.theta + o.theta,
        }
    }
}

pub fn bs_price(inputs: &BsInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(price_unchecked(inputs))
}

/// `bs_price` without input validation, for hot loops over inputs already
/// known to be in the domain.
pub(crate) fn price_unchecked(x: &BsInputs) -> f64 {
    if x.is_degenerate() {
        return x.intrinsic();
    }
    if x.strike == 0.0 {
        return match x.kind {
            OptionKind::Call => x.disc_spot(),
            OptionKind::Put => 0.0,
        };
    }
    let (d1, d2) = x.d1_d2();
    let i = x.kind.sign();
    let v = i * (x.disc_spot() * norm_cdf(i * d1) - x.disc_strike() * norm_cdf(i * d2));
    v.max(0.0)
}

/// Analytic greeks. Zero vol or zero tenor yields `DegenerateGreeks` carrying
/// the limiting values.
pub fn bs_greeks(inputs: &BsInputs) -> Result<Greeks> {
    inputs.validate()?;
    let x = inputs;
    let i = x.kind.sign();
    let dq = (-x.carry_yield * x.tenor).exp();
    if x.is_degenerate() {
        let itm = i * (x.disc_spot() - x.disc_strike()) > 0.0;
        let greeks = Greeks {
            delta: if itm { i * dq } else { 0.0 },
            ..Greeks::default()
        };
        return Err(Error::DegenerateGreeks { greeks });
    }
    if x.strike == 0.0 {
        return Ok(match x.kind {
            OptionKind::Call => Greeks {
                delta: dq,
                theta: x.carry_yield * x.disc_spot(),
                ..Greeks::default()
            },
            OptionKind::Put => Greeks::default(),
        });
    }
    let (d1, d2) = x.d1_d2();
    let sqrt_t = x.tenor.sqrt();
    let pdf = norm_pdf(d1);
    let ds = x.disc_spot();
    let dk = x.disc_strike();
    let vega = ds * pdf * sqrt_t;
    let volga = if vega == 0.0 { 0.0 } else { vega * d1 * d2 / x.vol };
    Ok(Greeks {
        delta: i * dq * norm_cdf(i * d1),
        gamma: dq * pdf / (x.spot * x.vol * sqrt_t),
        vega,
        volga,
        theta: -ds * pdf * x.vol / (2.0 * sqrt_t) - i * x.rate * dk * norm_cdf(i * d2)
            + i * x.carry_yield * ds * norm_cdf(i * d1),
    })
}

/// Greeks, accepting the degenerate limit instead of an error.
pub fn bs_greeks_or_limit(inputs: &BsInputs) -> Result<Greeks> {
    match bs_greeks(inputs) {
        Err(Error::DegenerateGreeks { greeks }) => Ok(greeks),
        other => other,
    }
}

pub const IV_LOWER: f64 = 1e-4;
pub const IV_UPPER: f64 = 5.0;
const IV_TOL: f64 = 1e-10;
const IV_MAX_ITER: usize = 200;

/// Black-Scholes implied volatility by Brent's method on [1e-4, 5], with the
/// upper end doubled once if the price is not bracketed. `inputs.vol` is ignored.
pub fn implied_vol(market_price: f64, inputs: &BsInputs) -> Result<f64> {
    let base = inputs.with_vol(0.0);
    base.validate()?;
    if !market_price.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite price {market_price}")));
    }
    if base.tenor == 0.0 {
        return Err(Error::InvalidInput(
            "implied vol undefined at zero tenor".into(),
        ));
    }
    let lower = base.intrinsic();
    let upper = match base.kind {
        OptionKind::Call => base.disc_spot(),
        OptionKind::Put => base.disc_strike(),
    };
    if market_price <= lower || market_price >= upper {
        return Err(Error::NoImpliedVol {
            price: market_price,
            lower,
            upper,
        });
    }
    let f = |v: f64| price_unchecked(&base.with_vol(v)) - market_price;
    let mut hi = IV_UPPER;
    let f_lo = f(IV_LOWER);
    let mut f_hi = f(hi);
    if f_lo * f_hi > 0.0 && f_lo < 0.0 {
        hi *= 2.0;
        f_hi = f(hi);
    }
    if f_lo * f_hi > 0.0 {
        return Err(Error::ConvergenceFailure {
            what: "implied vol bracket",
            iterations: 0,
            residual: if f_lo > 0.0 { f_lo } else { f_hi },
        });
    }
    brent(f, IV_LOWER, hi, f_lo, f_hi, IV_TOL, IV_MAX_ITER)
}

/// Brent's root finder given a bracketing interval with known end values.
pub fn brent(
    f: impl Fn(f64) -> f64,
    a0: f64,
    b0: f64,
    fa0: f64,
    fb0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let (mut a, mut b, mut fa, mut fb) = (a0, b0, fa0, fb0);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::ConvergenceFailure {
        what: "brent",
        iterations: max_iter,
        residual: fb,
    })
}
