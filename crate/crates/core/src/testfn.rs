//! Smooth rapidly decaying test functions F with closed-form derivatives.

use std::fmt;

use crate::error::{Error, Result};

/// Threshold below which F and F' count as zero.
pub const SUPPORT_EPS: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// e^{-a x^2}
    Gauss { a: f64 },
    /// x^k e^{-a x^2}
    PolyGauss { k: u32, a: f64 },
    /// sech^2(a x)
    Sech2 { a: f64 },
}

/// amplitude * shape(x - shift)
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub amplitude: f64,
    pub shift: f64,
    pub shape: Shape,
}

/// A finite sum of components; the empty sum is F = 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestFunction {
    components: Vec<Component>,
}

fn sech2(t: f64) -> f64 {
    let e = (-2.0 * t.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

impl Shape {
    fn validate(&self) -> Result<()> {
        let a = match *self {
            Shape::Gauss { a } | Shape::PolyGauss { a, .. } | Shape::Sech2 { a } => a,
        };
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("test function width parameter must be positive, got {a}")));
        }
        if let Shape::PolyGauss { k, .. } = *self {
            if k > 12 {
                return Err(Error::InvalidParameter(format!("polygauss degree must be <= 12, got {k}")));
            }
        }
        Ok(())
    }

    fn value(&self, t: f64) -> f64 {
        match *self {
            Shape::Gauss { a } => (-a * t * t).exp(),
            Shape::PolyGauss { k, a } => t.powi(k as i32) * (-a * t * t).exp(),
            Shape::Sech2 { a } => sech2(a * t),
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        match *self {
            Shape::Gauss { a } => -2.0 * a * t * (-a * t * t).exp(),
            Shape::PolyGauss { k, a } => {
                let g = (-a * t * t).exp();
                let lead = if k == 0 { 0.0 } else { k as f64 * t.powi(k as i32 - 1) };
                (lead - 2.0 * a * t.powi(k as i32 + 1)) * g
            }
            Shape::Sech2 { a } => -2.0 * a * sech2(a * t) * (a * t).tanh(),
        }
    }

    /// Half-width beyond which |amp F| and |amp F'| are below SUPPORT_EPS.
    fn half_width(&self, amp: f64) -> f64 {
        let amp = amp.abs().max(1.0);
        // scan outward on a geometric grid; every shape is monotone past its peak
        let mut r = 0.5f64;
        loop {
            let v = self.value(r).abs().max(self.value(-r).abs());
            let d = self.derivative(r).abs().max(self.derivative(-r).abs());
            let peak_passed = match *self {
                Shape::PolyGauss { k, a } => r * r > k as f64 / (2.0 * a) + 1.0 / a,
                _ => true,
            };
            if peak_passed && amp * v.max(d) < SUPPORT_EPS {
                return r;
            }
            r *= 1.05;
        }
    }
}

impl TestFunction {
    pub fn zero() -> Self {
        TestFunction { components: Vec::new() }
    }

    /// e^{-a (x - c)^2}
    pub fn gauss(a: f64, c: f64) -> Result<Self> {
        Self::single(1.0, c, Shape::Gauss { a })
    }

    /// x^k e^{-a x^2}
    pub fn poly_gauss(k: u32, a: f64) -> Result<Self> {
        Self::single(1.0, 0.0, Shape::PolyGauss { k, a })
    }

    /// sech^2(a x)
    pub fn sech2(a: f64) -> Result<Self> {
        Self::single(1.0, 0.0, Shape::Sech2 { a })
    }

    pub fn single(amplitude: f64, shift: f64, shape: Shape) -> Result<Self> {
        Self::from_components(vec![Component { amplitude, shift, shape }])
    }

    pub fn from_components(components: Vec<Component>) -> Result<Self> {
        for c in &components {
            c.shape.validate()?;
            if !c.amplitude.is_finite() || !c.shift.is_finite() {
                return Err(Error::InvalidParameter("test function amplitude and shift must be finite".into()));
            }
        }
        Ok(TestFunction { components })
    }

    /// Parses `gauss:a,c`, `polygauss:k,a`, `sech2:a` or `zero`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (family, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let params: Vec<f64> = if rest.trim().is_empty() {
            Vec::new()
        } else {
            rest.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidParameter(format!("bad test function parameter '{p}'")))
                })
                .collect::<Result<_>>()?
        };
        let want = |n: usize| -> Result<()> {
            if params.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "test function '{family}' takes {n} parameter(s), got {}",
                    params.len()
                )));
            }
            Ok(())
        };
        match family.to_ascii_lowercase().as_str() {
            "zero" => {
                want(0)?;
                Ok(Self::zero())
            }
            "gauss" => {
                want(2)?;
                Self::gauss(params[0], params[1])
            }
            "polygauss" => {
                want(2)?;
                let k = params[0];
                if k < 0.0 || k.fract() != 0.0 {
                    return Err(Error::InvalidParameter(format!("polygauss degree must be a non-negative integer, got {k}")));
                }
                Self::poly_gauss(k as u32, params[1])
            }
            "sech2" => {
                want(1)?;
                Self::sech2(params[0])
            }
            other => Err(Error::InvalidParameter(format!("unknown test function family '{other}'"))),
        }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.amplitude == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.amplitude * c.shape.value(x - c.shift)).sum()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.amplitude * c.shape.derivative(x - c.shift)).sum()
    }

    /// Interval outside which |F| and |F'| are below SUPPORT_EPS; None for F = 0.
    pub fn effective_support(&self) -> Option<(f64, f64)> {
        let mut out: Option<(f64, f64)> = None;
        for c in &self.components {
            if c.amplitude == 0.0 {
                continue;
            }
            let h = c.shape.half_width(c.amplitude);
            let (lo, hi) = (c.shift - h, c.shift + h);
            out = Some(match out {
                None => (lo, hi),
                Some((a, b)) => (a.min(lo), b.max(hi)),
            });
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TestFunction {
            components: self
                .components
                .iter()
                .map(|c| Component { amplitude: c.amplitude * factor, ..*c })
                .collect(),
        }
    }

    pub fn shifted(&self, s: f64) -> Self {
        TestFunction {
            components: self.components.iter().map(|c| Component { shift: c.shift + s, ..*c }).collect(),
        }
    }

    pub fn sum(&self, other: &TestFunction) -> Self {
        let mut components = self.components.clone();
        components.extend_from_slice(&other.components);
        TestFunction { components }
    }

    /// max |F| sampled densely over the effective support.
    pub fn sup_abs(&self) -> f64 {
        match self.effective_support() {
            None => 0.0,
            Some((lo, hi)) => {
                let n = 4000;
                (0..=n)
                    .map(|i| self.eval(lo + (hi - lo) * i as f64 / n as f64).abs())
                    .fold(0.0, f64::max)
            }
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "zero");
        }
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            if c.amplitude != 1.0 {
                write!(f, "{}*", c.amplitude)?;
            }
            match c.shape {
                Shape::Gauss { a } => write!(f, "gauss:{a},{}", c.shift)?,
                Shape::PolyGauss { k, a } => {
                    write!(f, "polygauss:{k},{a}")?;
                    if c.shift != 0.0 {
                        write!(f, "@{}", c.shift)?;
                    }
                }
                Shape::Sech2 { a } => {
                    write!(f, "sech2:{a}")?;
                    if c.shift != 0.0 {
                        write!(f, "@{}", c.shift)?;
                    }
                }
            }
        }
        Ok(())
    }
}
