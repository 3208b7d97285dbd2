//! Map families with forward step, analytic inverse and Jacobian.
//!
//! Orbits are iterated through a [`Stepper`], which holds the map parameters
//! rounded once into the active arithmetic and evaluates every operation,
//! modulo reductions included, in that arithmetic. Jacobians are always
//! evaluated in plain binary64.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::{Arithmetic, Backend, Dyadic, Precision};
use crate::with_backend;

/// Identifies a map family independently of its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapFamily {
    TorusTranslation,
    CircleRotation,
    Bernoulli,
    StandardMap,
    SkewMap,
    Froeschle4D,
}

impl MapFamily {
    pub const ALL: [MapFamily; 6] = [
        MapFamily::TorusTranslation,
        MapFamily::CircleRotation,
        MapFamily::Bernoulli,
        MapFamily::StandardMap,
        MapFamily::SkewMap,
        MapFamily::Froeschle4D,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MapFamily::TorusTranslation => "translation",
            MapFamily::CircleRotation => "rotation",
            MapFamily::Bernoulli => "bernoulli",
            MapFamily::StandardMap => "standard",
            MapFamily::SkewMap => "skew",
            MapFamily::Froeschle4D => "froeschle",
        }
    }
}

impl fmt::Display for MapFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MapFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        MapFamily::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown map family '{s}'")))
    }
}

/// Length of a periodic coordinate's fundamental domain `[0, L)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Period {
    Unit,
    TwoPi,
}

impl Period {
    pub fn value(&self) -> f64 {
        match self {
            Period::Unit => 1.0,
            Period::TwoPi => TAU,
        }
    }
}

/// A map family with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MapInstance {
    /// `x -> x + omega mod 1`
    TorusTranslation { omega: f64 },
    /// Rotation by `2 pi omega` of the unit circle embedded in the plane.
    CircleRotation { omega: f64 },
    /// `x -> q x mod 1`
    Bernoulli { q: u32 },
    /// `y -> y + lambda sin x mod 2pi`, then `x -> x + y mod 2pi`; coordinates `(x, y)`.
    StandardMap { lambda: f64 },
    /// `y -> y`, then `x -> x + y mod 1`; coordinates `(x, y)`.
    SkewMap,
    /// Coupled kicked rotors with potential `V = 1 / (cos theta + cos phi + 2 + c)`;
    /// coordinates `(theta, phi, I, J)`.
    Froeschle4D { c: f64, mu: f64 },
}

/// A point of phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State(pub Vec<f64>);

impl State {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        State(coords.into())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for State {
    fn from(v: Vec<f64>) -> Self {
        State(v)
    }
}

/// Square Jacobian matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl JacobianMatrix {
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "Jacobian must be square");
        JacobianMatrix { dim, entries: rows.iter().flat_map(|r| r.iter().copied()).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| self.entries[i * self.dim..(i + 1) * self.dim].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let n = self.dim;
        let mut a = self.entries.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap();
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for row in col + 1..n {
                let f = a[row * n + col] / p;
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
            }
        }
        det
    }
}

impl MapInstance {
    pub fn torus_translation(omega: f64) -> Result<Self> {
        let m = MapInstance::TorusTranslation { omega };
        m.validate()?;
        Ok(m)
    }

    pub fn circle_rotation(omega: f64) -> Result<Self> {
        let m = MapInstance::CircleRotation { omega };
        m.validate()?;
        Ok(m)
    }

    pub fn bernoulli(q: u32) -> Result<Self> {
        let m = MapInstance::Bernoulli { q };
        m.validate()?;
        Ok(m)
    }

    pub fn standard(lambda: f64) -> Result<Self> {
        let m = MapInstance::StandardMap { lambda };
        m.validate()?;
        Ok(m)
    }

    pub fn skew() -> Self {
        MapInstance::SkewMap
    }

    pub fn froeschle(c: f64, mu: f64) -> Result<Self> {
        let m = MapInstance::Froeschle4D { c, mu };
        m.validate()?;
        Ok(m)
    }

    /// Builds a map from a family name and `key=value` parameters.
    /// Accepted keys: `omega`; `q`; `lambda`; `c`, `mu`.
    pub fn from_params(family: &str, params: &[(String, f64)]) -> Result<Self> {
        let family: MapFamily = family.parse()?;
        let get = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(key))
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::invalid(format!("map '{family}' needs parameter '{key}'")))
        };
        let allowed: &[&str] = match family {
            MapFamily::TorusTranslation | MapFamily::CircleRotation => &["omega"],
            MapFamily::Bernoulli => &["q"],
            MapFamily::StandardMap => &["lambda"],
            MapFamily::SkewMap => &[],
            MapFamily::Froeschle4D => &["c", "mu"],
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.iter().any(|a| a.eq_ignore_ascii_case(k))) {
            return Err(Error::invalid(format!("map '{family}' has no parameter '{k}'")));
        }
        match family {
            MapFamily::TorusTranslation => Self::torus_translation(get("omega")?),
            MapFamily::CircleRotation => Self::circle_rotation(get("omega")?),
            MapFamily::Bernoulli => {
                let q = get("q")?;
                if q.fract() != 0.0 || !(2.0..=u32::MAX as f64).contains(&q) {
                    return Err(Error::invalid(format!("Bernoulli q must be an integer >= 2, got {q}")));
                }
                Self::bernoulli(q as u32)
            }
            MapFamily::StandardMap => Self::standard(get("lambda")?),
            MapFamily::SkewMap => Ok(Self::skew()),
            MapFamily::Froeschle4D => Self::froeschle(get("c")?, get("mu")?),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("parameter {name} must be finite")))
            }
        };
        match *self {
            MapInstance::TorusTranslation { omega } | MapInstance::CircleRotation { omega } => finite("omega", omega),
            MapInstance::Bernoulli { q } if q < 2 => Err(Error::invalid(format!("Bernoulli q must be >= 2, got {q}"))),
            MapInstance::Bernoulli { .. } | MapInstance::SkewMap => Ok(()),
            MapInstance::StandardMap { lambda } => {
                finite("lambda", lambda)?;
                if lambda < 0.0 {
                    return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
                }
                Ok(())
            }
            MapInstance::Froeschle4D { c, mu } => {
                finite("c", c)?;
                finite("mu", mu)?;
                if c <= 0.0 {
                    return Err(Error::invalid(format!("c must be > 0, got {c}")));
                }
                Ok(())
            }
        }
    }

    pub fn family(&self) -> MapFamily {
        match self {
            MapInstance::TorusTranslation { .. } => MapFamily::TorusTranslation,
            MapInstance::CircleRotation { .. } => MapFamily::CircleRotation,
            MapInstance::Bernoulli { .. } => MapFamily::Bernoulli,
            MapInstance::StandardMap { .. } => MapFamily::StandardMap,
            MapInstance::SkewMap => MapFamily::SkewMap,
            MapInstance::Froeschle4D { .. } => MapFamily::Froeschle4D,
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            MapInstance::TorusTranslation { omega } | MapInstance::CircleRotation { omega } => vec![("omega", omega)],
            MapInstance::Bernoulli { q } => vec![("q", q as f64)],
            MapInstance::StandardMap { lambda } => vec![("lambda", lambda)],
            MapInstance::SkewMap => vec![],
            MapInstance::Froeschle4D { c, mu } => vec![("c", c), ("mu", mu)],
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            MapInstance::TorusTranslation { .. } | MapInstance::Bernoulli { .. } => 1,
            MapInstance::CircleRotation { .. } | MapInstance::StandardMap { .. } | MapInstance::SkewMap => 2,
            MapInstance::Froeschle4D { .. } => 4,
        }
    }

    pub fn invertible(&self) -> bool {
        !matches!(self, MapInstance::Bernoulli { .. })
    }

    pub fn coordinate_names(&self) -> &'static [&'static str] {
        match self {
            MapInstance::TorusTranslation { .. } | MapInstance::Bernoulli { .. } => &["x"],
            MapInstance::CircleRotation { .. } | MapInstance::StandardMap { .. } | MapInstance::SkewMap => &["x", "y"],
            MapInstance::Froeschle4D { .. } => &["theta", "phi", "I", "J"],
        }
    }

    pub fn coordinate_index(&self, name: &str) -> Result<usize> {
        self.coordinate_names()
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::invalid(format!("map '{}' has no coordinate '{name}'", self.family())))
    }

    /// Period of each coordinate, `None` for non-periodic ones.
    pub fn periods(&self) -> Vec<Option<Period>> {
        match self {
            MapInstance::TorusTranslation { .. } | MapInstance::Bernoulli { .. } => vec![Some(Period::Unit)],
            MapInstance::CircleRotation { .. } => vec![None, None],
            MapInstance::StandardMap { .. } => vec![Some(Period::TwoPi); 2],
            MapInstance::SkewMap => vec![Some(Period::Unit); 2],
            MapInstance::Froeschle4D { .. } => vec![Some(Period::TwoPi), Some(Period::TwoPi), None, None],
        }
    }

    /// Indices of the action coordinates, for maps that have them.
    pub fn action_indices(&self) -> Option<&'static [usize]> {
        match self {
            MapInstance::StandardMap { .. } | MapInstance::SkewMap => Some(&[1]),
            MapInstance::Froeschle4D { .. } => Some(&[2, 3]),
            _ => None,
        }
    }

    /// Unit-circle point `(cos 2 pi x, sin 2 pi x)` for the rotation map.
    pub fn circle_point(x: f64) -> State {
        let arg = Dyadic::pi(200).scale2(1).mul(&Dyadic::from_f64(x).expect("finite angle"));
        State(vec![arg.cos_approx(160).to_f64(), arg.sin_approx(160).to_f64()])
    }

    /// Checks dimension, finiteness and fundamental domains of a state.
    ///
    /// Rotation states must satisfy `|x^2 + y^2 - 1| <= 2^(-p/2)` (with `p`
    /// capped at 53), loose enough to accept points of a long rounded orbit.
    pub fn validate_state(&self, s: &State, precision: Precision) -> Result<()> {
        if s.dim() != self.state_dim() {
            return Err(Error::invalid(format!(
                "map '{}' expects {} coordinates, got {}",
                self.family(),
                self.state_dim(),
                s.dim()
            )));
        }
        if s.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("state coordinates must be finite"));
        }
        for (i, (v, period)) in s.0.iter().zip(self.periods()).enumerate() {
            if let Some(p) = period {
                if !(0.0..p.value()).contains(v) {
                    return Err(Error::invalid(format!(
                        "coordinate {} = {v} outside its domain [0, {})",
                        self.coordinate_names()[i],
                        p.value()
                    )));
                }
            }
        }
        if let MapInstance::CircleRotation { .. } = self {
            let bits = precision.significand_bits().min(53) as i32;
            let tol = 2f64.powi(-bits / 2);
            let r2 = s.0[0] * s.0[0] + s.0[1] * s.0[1];
            if (r2 - 1.0).abs() > tol {
                return Err(Error::invalid(format!("rotation state off the unit circle: x^2 + y^2 = {r2}")));
            }
        }
        Ok(())
    }

    /// Analytic Jacobian at `s`, evaluated in binary64.
    pub fn jacobian(&self, s: &State) -> JacobianMatrix {
        self.jacobian_at(s.coords())
    }

    pub(crate) fn jacobian_at(&self, s: &[f64]) -> JacobianMatrix {
        match *self {
            MapInstance::TorusTranslation { .. } => JacobianMatrix::from_rows(&[&[1.0]]),
            MapInstance::Bernoulli { q } => JacobianMatrix::from_rows(&[&[q as f64]]),
            MapInstance::CircleRotation { omega } => {
                let (c, sn) = (libm::cos(TAU * omega), libm::sin(TAU * omega));
                JacobianMatrix::from_rows(&[&[c, -sn], &[sn, c]])
            }
            MapInstance::StandardMap { lambda } => {
                let k = lambda * libm::cos(s[0]);
                JacobianMatrix::from_rows(&[&[1.0 + k, 1.0], &[k, 1.0]])
            }
            MapInstance::SkewMap => JacobianMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]),
            MapInstance::Froeschle4D { c, mu } => {
                let th = s[0] + s[2];
                let ph = s[1] + s[3];
                let (st, ct) = (libm::sin(th), libm::cos(th));
                let (sp, cp) = (libm::sin(ph), libm::cos(ph));
                let v = 1.0 / (ct + cp + 2.0 + c);
                let (v2, v3) = (v * v, v * v * v);
                let vtt = ct * v2 + 2.0 * st * st * v3;
                let vpp = cp * v2 + 2.0 * sp * sp * v3;
                let vtp = 2.0 * st * sp * v3;
                let (a, b, d) = (mu * vtt, mu * vtp, mu * vpp);
                JacobianMatrix::from_rows(&[
                    &[1.0, 0.0, 1.0, 0.0],
                    &[0.0, 1.0, 0.0, 1.0],
                    &[-a, -b, 1.0 - a, -b],
                    &[-b, -d, -b, 1.0 - d],
                ])
            }
        }
    }
}

impl fmt::Display for MapInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family())?;
        for (k, v) in self.params() {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

/// Parameters of a map rounded once into an arithmetic.
#[derive(Clone, Debug)]
enum Consts<V> {
    Translation { omega: V, one: V },
    Rotation { cos: V, sin: V },
    Bernoulli { q: V, one: V },
    Standard { lambda: V, two_pi: V },
    Skew { one: V },
    Froeschle { mu: V, two_plus_c: V, one: V, two_pi: V },
}

/// A map bound to an arithmetic backend, ready to iterate.
#[derive(Clone, Debug)]
pub struct Stepper<A: Arithmetic> {
    map: MapInstance,
    ar: A,
    consts: Consts<A::Value>,
    periods: Vec<Option<A::Value>>,
    period_f64: Vec<Option<f64>>,
}

impl<A: Arithmetic> Stepper<A> {
    pub fn new(map: &MapInstance, ar: A) -> Result<Self> {
        map.validate()?;
        let r = |x: f64| ar.from_f64(x);
        let bits = working_bits(ar.precision()) + 64;
        let two_pi = ar.from_dyadic(&Dyadic::pi(bits).scale2(1));
        let consts = match *map {
            MapInstance::TorusTranslation { omega } => Consts::Translation { omega: r(omega), one: r(1.0) },
            MapInstance::CircleRotation { omega } => {
                let p = MapInstance::circle_params(omega, bits);
                Consts::Rotation { cos: ar.from_dyadic(&p.0), sin: ar.from_dyadic(&p.1) }
            }
            MapInstance::Bernoulli { q } => Consts::Bernoulli { q: r(q as f64), one: r(1.0) },
            MapInstance::StandardMap { lambda } => Consts::Standard { lambda: r(lambda), two_pi: two_pi.clone() },
            MapInstance::SkewMap => Consts::Skew { one: r(1.0) },
            MapInstance::Froeschle4D { c, mu } => {
                let two_plus_c = ar.from_dyadic(&Dyadic::from_f64(c).expect("finite").add(&Dyadic::from_i64(2)));
                Consts::Froeschle { mu: r(mu), two_plus_c, one: r(1.0), two_pi: two_pi.clone() }
            }
        };
        let periods: Vec<Option<A::Value>> = map
            .periods()
            .into_iter()
            .map(|p| {
                p.map(|p| match p {
                    Period::Unit => r(1.0),
                    Period::TwoPi => two_pi.clone(),
                })
            })
            .collect();
        if periods.iter().flatten().chain(consts.values()).any(|v| !ar.is_finite(v)) {
            return Err(Error::Numeric(format!("parameters of {map} overflow {}", ar.precision())));
        }
        let period_f64 = periods.iter().map(|p| p.as_ref().map(|v| ar.to_f64(v))).collect();
        Ok(Stepper { map: map.clone(), ar, consts, periods, period_f64 })
    }

    pub fn map(&self) -> &MapInstance {
        &self.map
    }

    pub fn arithmetic(&self) -> &A {
        &self.ar
    }

    /// Period of each coordinate as stored in this arithmetic, converted to `f64`.
    pub fn periods_f64(&self) -> &[Option<f64>] {
        &self.period_f64
    }

    /// Rounds a seed into the arithmetic and reduces periodic coordinates.
    pub fn load(&self, s: &State) -> Result<Vec<A::Value>> {
        self.map.validate_state(s, self.ar.precision())?;
        let mut v: Vec<A::Value> = s.0.iter().map(|&x| self.ar.from_f64(x)).collect();
        self.reduce_all(&mut v);
        Ok(v)
    }

    /// Loads a seed given exactly (for example, a value already rounded elsewhere).
    pub fn load_exact(&self, s: &[Dyadic]) -> Vec<A::Value> {
        let mut v: Vec<A::Value> = s.iter().map(|x| self.ar.from_dyadic(x)).collect();
        self.reduce_all(&mut v);
        v
    }

    fn reduce_all(&self, v: &mut [A::Value]) {
        for (x, p) in v.iter_mut().zip(&self.periods) {
            if let Some(p) = p {
                *x = self.ar.reduce(x, p);
            }
        }
    }

    pub fn to_state(&self, v: &[A::Value]) -> State {
        State(v.iter().map(|x| self.ar.to_f64(x)).collect())
    }

    pub fn is_finite(&self, v: &[A::Value]) -> bool {
        v.iter().all(|x| self.ar.is_finite(x))
    }

    /// One forward step. With `noise`, each coordinate receives its
    /// perturbation at the point where it is updated.
    pub fn forward(&self, s: &mut [A::Value], noise: Option<&[A::Value]>) {
        let ar = &self.ar;
        let perturb = |v: A::Value, i: usize| match noise {
            Some(n) => ar.add(&v, &n[i]),
            None => v,
        };
        match &self.consts {
            Consts::Translation { omega, one } => {
                s[0] = ar.reduce(&perturb(ar.add(&s[0], omega), 0), one);
            }
            Consts::Bernoulli { q, one } => {
                s[0] = ar.reduce(&perturb(ar.mul(q, &s[0]), 0), one);
            }
            Consts::Rotation { cos, sin } => {
                let x = ar.sub(&ar.mul(cos, &s[0]), &ar.mul(sin, &s[1]));
                let y = ar.add(&ar.mul(sin, &s[0]), &ar.mul(cos, &s[1]));
                s[0] = perturb(x, 0);
                s[1] = perturb(y, 1);
            }
            Consts::Standard { lambda, two_pi } => {
                let kick = ar.mul(lambda, &ar.sin(&s[0]));
                s[1] = ar.reduce(&perturb(ar.add(&s[1], &kick), 1), two_pi);
                s[0] = ar.reduce(&perturb(ar.add(&s[0], &s[1]), 0), two_pi);
            }
            Consts::Skew { one } => {
                if noise.is_some() {
                    s[1] = ar.reduce(&perturb(s[1].clone(), 1), one);
                }
                s[0] = ar.reduce(&perturb(ar.add(&s[0], &s[1]), 0), one);
            }
            Consts::Froeschle { mu, two_plus_c, one, two_pi } => {
                s[0] = ar.reduce(&perturb(ar.add(&s[0], &s[2]), 0), two_pi);
                s[1] = ar.reduce(&perturb(ar.add(&s[1], &s[3]), 1), two_pi);
                let (gt, gp) = self.froeschle_gradient(&s[0], &s[1], two_plus_c, one);
                s[2] = perturb(ar.sub(&s[2], &ar.mul(mu, &gt)), 2);
                s[3] = perturb(ar.sub(&s[3], &ar.mul(mu, &gp)), 3);
            }
        }
    }

    /// One step of the analytic inverse. Panics for non-invertible maps;
    /// callers check [`MapInstance::invertible`] first.
    pub fn inverse(&self, s: &mut [A::Value], noise: Option<&[A::Value]>) {
        let ar = &self.ar;
        let perturb = |v: A::Value, i: usize| match noise {
            Some(n) => ar.add(&v, &n[i]),
            None => v,
        };
        match &self.consts {
            Consts::Translation { omega, one } => {
                s[0] = ar.reduce(&perturb(ar.sub(&s[0], omega), 0), one);
            }
            Consts::Bernoulli { .. } => panic!("the Bernoulli map has no inverse"),
            Consts::Rotation { cos, sin } => {
                let x = ar.add(&ar.mul(cos, &s[0]), &ar.mul(sin, &s[1]));
                let y = ar.sub(&ar.mul(cos, &s[1]), &ar.mul(sin, &s[0]));
                s[0] = perturb(x, 0);
                s[1] = perturb(y, 1);
            }
            Consts::Standard { lambda, two_pi } => {
                s[0] = ar.reduce(&perturb(ar.sub(&s[0], &s[1]), 0), two_pi);
                let kick = ar.mul(lambda, &ar.sin(&s[0]));
                s[1] = ar.reduce(&perturb(ar.sub(&s[1], &kick), 1), two_pi);
            }
            Consts::Skew { one } => {
                s[0] = ar.reduce(&perturb(ar.sub(&s[0], &s[1]), 0), one);
                if noise.is_some() {
                    s[1] = ar.reduce(&perturb(s[1].clone(), 1), one);
                }
            }
            Consts::Froeschle { mu, two_plus_c, one, two_pi } => {
                let (gt, gp) = self.froeschle_gradient(&s[0], &s[1], two_plus_c, one);
                s[2] = perturb(ar.add(&s[2], &ar.mul(mu, &gt)), 2);
                s[3] = perturb(ar.add(&s[3], &ar.mul(mu, &gp)), 3);
                s[0] = ar.reduce(&perturb(ar.sub(&s[0], &s[2]), 0), two_pi);
                s[1] = ar.reduce(&perturb(ar.sub(&s[1], &s[3]), 1), two_pi);
            }
        }
    }

    /// `(dV/dtheta, dV/dphi)` as `sin * V^2` with `V = 1 / (cos + cos + (2 + c))`.
    fn froeschle_gradient(
        &self,
        theta: &A::Value,
        phi: &A::Value,
        two_plus_c: &A::Value,
        one: &A::Value,
    ) -> (A::Value, A::Value) {
        let ar = &self.ar;
        let d = ar.add(&ar.add(&ar.cos(theta), &ar.cos(phi)), two_plus_c);
        let v = ar.div(one, &d);
        let v2 = ar.mul(&v, &v);
        (ar.mul(&ar.sin(theta), &v2), ar.mul(&ar.sin(phi), &v2))
    }

    /// Signed difference `a - b` of one coordinate, wrapped into
    /// `[-L/2, L/2)` for periodic coordinates.
    pub fn coordinate_difference(&self, index: usize, a: &A::Value, b: &A::Value) -> f64 {
        let d = match (self.ar.as_exact_f64(a), self.ar.as_exact_f64(b)) {
            (Some(x), Some(y)) => x - y,
            _ => match (self.ar.to_dyadic(a), self.ar.to_dyadic(b)) {
                (Some(x), Some(y)) => x.sub(&y).to_f64(),
                _ => f64::NAN,
            },
        };
        wrap(d, self.period_f64[index])
    }
}

impl<V> Consts<V> {
    fn values(&self) -> Vec<&V> {
        match self {
            Consts::Translation { omega, one } => vec![omega, one],
            Consts::Rotation { cos, sin } => vec![cos, sin],
            Consts::Bernoulli { q, one } => vec![q, one],
            Consts::Standard { lambda, two_pi } => vec![lambda, two_pi],
            Consts::Skew { one } => vec![one],
            Consts::Froeschle { mu, two_plus_c, one, two_pi } => vec![mu, two_plus_c, one, two_pi],
        }
    }
}

impl MapInstance {
    /// `(cos 2 pi omega, sin 2 pi omega)` at high precision.
    fn circle_params(omega: f64, bits: u64) -> (Dyadic, Dyadic) {
        let arg = Dyadic::pi(bits + 64).scale2(1).mul(&Dyadic::from_f64(omega).expect("finite omega"));
        (arg.cos_approx(bits + 64), arg.sin_approx(bits + 64))
    }
}

/// Bits of a precision, with exact arithmetic counted at its working width.
fn working_bits(p: Precision) -> u64 {
    match p {
        Precision::Rounded(s) => s.significand_bits() as u64,
        Precision::Exact => crate::precision::EXACT_WORKING_BITS as u64,
    }
}

/// Wraps a difference into `[-L/2, L/2)`.
pub(crate) fn wrap(d: f64, period: Option<f64>) -> f64 {
    match period {
        Some(p) if d.is_finite() => d - p * (d / p + 0.5).floor(),
        _ => d,
    }
}

/// Differences between two states loaded in possibly different arithmetics.
pub(crate) fn cross_difference<A: Arithmetic, B: Arithmetic>(
    a: &Stepper<A>,
    va: &A::Value,
    b: &Stepper<B>,
    vb: &B::Value,
    index: usize,
) -> f64 {
    let d = match (a.ar.as_exact_f64(va), b.ar.as_exact_f64(vb)) {
        (Some(x), Some(y)) => x - y,
        _ => match (a.ar.to_dyadic(va), b.ar.to_dyadic(vb)) {
            (Some(x), Some(y)) => x.sub(&y).to_f64(),
            _ => f64::NAN,
        },
    };
    // the wider period is the better estimate of the true one
    let period = b.period_f64[index].or(a.period_f64[index]);
    wrap(d, period)
}

/// One forward step at the given precision.
pub fn forward(map: &MapInstance, s: &State, precision: Precision) -> Result<State> {
    with_backend!(Backend::select(precision), ar => {
        let st = Stepper::new(map, ar)?;
        let mut v = st.load(s)?;
        st.forward(&mut v, None);
        check_finite(&st, &v)?;
        Ok(st.to_state(&v))
    })
}

/// One step of the analytic inverse at the given precision.
pub fn inverse(map: &MapInstance, s: &State, precision: Precision) -> Result<State> {
    if !map.invertible() {
        return Err(Error::Unsupported(format!("map '{}' is not invertible", map.family())));
    }
    with_backend!(Backend::select(precision), ar => {
        let st = Stepper::new(map, ar)?;
        let mut v = st.load(s)?;
        st.inverse(&mut v, None);
        check_finite(&st, &v)?;
        Ok(st.to_state(&v))
    })
}

/// Analytic Jacobian at `s`.
pub fn jacobian(map: &MapInstance, s: &State) -> JacobianMatrix {
    map.jacobian(s)
}

/// Advances the state one step at `precision` and each deviation vector by
/// the Jacobian at the pre-step state (in binary64).
pub fn forward_with_tangent(
    map: &MapInstance,
    s: &State,
    vectors: &[Vec<f64>],
    precision: Precision,
) -> Result<(State, Vec<Vec<f64>>)> {
    if vectors.is_empty() || vectors.len() > 2 {
        return Err(Error::invalid("one or two deviation vectors are required"));
    }
    if vectors.iter().any(|v| v.len() != map.state_dim()) {
        return Err(Error::invalid("deviation vector dimension does not match the map"));
    }
    let j = map.jacobian(s);
    let next = forward(map, s, precision)?;
    Ok((next, vectors.iter().map(|v| j.apply(v)).collect()))
}

pub(crate) fn check_finite<A: Arithmetic>(st: &Stepper<A>, v: &[A::Value]) -> Result<()> {
    if st.is_finite(v) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("orbit of {} left the range of {}", st.map(), st.arithmetic().precision())))
    }
}
