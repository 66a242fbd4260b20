//! ODE system abstraction shared by every built-in model.
//!
//! A [`SystemDefinition`] bundles the vector field with its metadata:
//! state names, parameter descriptors and whether the field depends on
//! time explicitly. Parameters are passed to the field on every call, so
//! one definition serves any point of the combined parameter and
//! initial-condition space.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Right-hand side of `dY/dt = f(t, Y; p)` and, optionally, its Jacobian.
pub trait VectorField: Send + Sync {
    fn rhs(&self, t: f64, y: &[f64], p: &[f64], dy: &mut [f64]);

    /// Writes `∂f_i/∂y_j` row-major into `jac` and returns `true`, or returns
    /// `false` when no closed form is available.
    fn jacobian(&self, _t: f64, _y: &[f64], _p: &[f64], _jac: &mut [f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDescriptor {
    pub name: String,
    /// `None` for parameters that must be supplied by configuration.
    pub default: Option<f64>,
    pub units: String,
    #[serde(default)]
    pub description: String,
}

impl ParamDescriptor {
    pub fn new(name: &str, default: f64, units: &str, description: &str) -> Self {
        Self {
            name: name.to_owned(),
            default: Some(default),
            units: units.to_owned(),
            description: description.to_owned(),
        }
    }

    pub fn required(name: &str, units: &str, description: &str) -> Self {
        Self {
            name: name.to_owned(),
            default: None,
            units: units.to_owned(),
            description: description.to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDescriptor {
    pub name: String,
    pub default: Option<f64>,
}

/// Row-major dense Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Jacobian {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Clone)]
pub struct SystemDefinition {
    id: String,
    description: String,
    states: Vec<StateDescriptor>,
    params: Vec<ParamDescriptor>,
    time_dependent: bool,
    field: Arc<dyn VectorField>,
}

impl fmt::Debug for SystemDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemDefinition")
            .field("id", &self.id)
            .field("states", &self.states)
            .field("params", &self.params)
            .field("time_dependent", &self.time_dependent)
            .finish_non_exhaustive()
    }
}

impl SystemDefinition {
    pub fn new(
        id: &str,
        description: &str,
        states: Vec<StateDescriptor>,
        params: Vec<ParamDescriptor>,
        time_dependent: bool,
        field: Arc<dyn VectorField>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(invalid("system must have at least one state"));
        }
        let mut names: Vec<&str> = params.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid(format!("duplicate parameter names in `{id}`")));
        }
        Ok(Self {
            id: id.to_owned(),
            description: description.to_owned(),
            states,
            params,
            time_dependent,
            field,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[ParamDescriptor] {
        &self.params
    }

    pub fn states(&self) -> &[StateDescriptor] {
        &self.states
    }

    pub fn state_names(&self) -> Vec<String> {
        self.states.iter().map(|s| s.name.clone()).collect()
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn default_params(&self) -> Result<Vec<f64>> {
        self.params
            .iter()
            .map(|p| p.default.ok_or_else(|| Error::MissingParameter(p.name.clone())))
            .collect()
    }

    pub fn default_state(&self) -> Result<Vec<f64>> {
        self.states
            .iter()
            .map(|s| {
                s.default
                    .ok_or_else(|| Error::MissingParameter(format!("ic.{}", s.name)))
            })
            .collect()
    }

    pub fn default_sample(&self) -> Result<SamplePoint> {
        Ok(SamplePoint {
            system_id: self.id.clone(),
            param_values: self.default_params()?,
            initial_state: self.default_state()?,
        })
    }

    /// Unchecked evaluation used on the integrator hot path.
    #[inline]
    pub(crate) fn rhs_into(&self, t: f64, y: &[f64], p: &[f64], dy: &mut [f64]) {
        self.field.rhs(t, y, p, dy);
    }

    /// Jacobian into a caller-owned buffer; analytic when available,
    /// otherwise central differences.
    pub(crate) fn jacobian_into(
        &self,
        t: f64,
        y: &[f64],
        p: &[f64],
        jac: &mut [f64],
        scratch: &mut FdScratch,
    ) {
        if !self.field.jacobian(t, y, p, jac) {
            self.fd_jacobian_into(t, y, p, jac, scratch);
        }
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        let n = self.dim();
        let y = vec![0.5; n];
        let p = vec![1.0; self.n_params()];
        let mut jac = vec![0.0; n * n];
        self.field.jacobian(0.0, &y, &p, &mut jac)
    }

    fn check_lengths(&self, y: &[f64], p: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::Dimension {
                what: "state",
                got: y.len(),
                expected: self.dim(),
            });
        }
        if p.len() != self.n_params() {
            return Err(Error::Dimension {
                what: "params",
                got: p.len(),
                expected: self.n_params(),
            });
        }
        Ok(())
    }

    pub fn eval_rhs(&self, t: f64, y: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        self.check_lengths(y, p)?;
        let mut dy = vec![0.0; self.dim()];
        self.field.rhs(t, y, p, &mut dy);
        if dy.iter().all(|v| v.is_finite()) {
            Ok(dy)
        } else {
            Err(Error::Blowup("rhs"))
        }
    }

    pub fn eval_jacobian(&self, t: f64, y: &[f64], p: &[f64]) -> Result<Jacobian> {
        self.check_lengths(y, p)?;
        let n = self.dim();
        let mut data = vec![0.0; n * n];
        let mut scratch = FdScratch::new(n);
        self.jacobian_into(t, y, p, &mut data, &mut scratch);
        if data.iter().all(|v| v.is_finite()) {
            Ok(Jacobian { n, data })
        } else {
            Err(Error::Blowup("jacobian"))
        }
    }

    /// Central finite-difference Jacobian, step `1e-6·max(1, |y_j|)`.
    pub fn fd_jacobian(&self, t: f64, y: &[f64], p: &[f64]) -> Result<Jacobian> {
        self.check_lengths(y, p)?;
        let n = self.dim();
        let mut data = vec![0.0; n * n];
        let mut scratch = FdScratch::new(n);
        self.fd_jacobian_into(t, y, p, &mut data, &mut scratch);
        Ok(Jacobian { n, data })
    }

    fn fd_jacobian_into(&self, t: f64, y: &[f64], p: &[f64], jac: &mut [f64], s: &mut FdScratch) {
        let n = self.dim();
        s.y.copy_from_slice(y);
        for j in 0..n {
            let h = 1e-6 * y[j].abs().max(1.0);
            s.y[j] = y[j] + h;
            self.field.rhs(t, &s.y, p, &mut s.plus);
            s.y[j] = y[j] - h;
            self.field.rhs(t, &s.y, p, &mut s.minus);
            s.y[j] = y[j];
            for i in 0..n {
                jac[i * n + j] = (s.plus[i] - s.minus[i]) / (2.0 * h);
            }
        }
    }

    /// Trace of the Jacobian at `t = 0` and the sample's initial state.
    /// Negative values pass the boundedness screen.
    pub fn divergence_at(&self, sample: &SamplePoint) -> Result<f64> {
        self.check_sample(sample)?;
        let jac = self.eval_jacobian(0.0, &sample.initial_state, &sample.param_values)?;
        Ok(jac.trace())
    }

    pub fn check_sample(&self, sample: &SamplePoint) -> Result<()> {
        if sample.system_id != self.id {
            return Err(invalid(format!(
                "sample belongs to `{}`, not `{}`",
                sample.system_id, self.id
            )));
        }
        self.check_lengths(&sample.initial_state, &sample.param_values)
    }

    pub fn catalog_entry(&self) -> CatalogEntry {
        CatalogEntry {
            id: self.id.clone(),
            description: self.description.clone(),
            dim: self.dim(),
            state_names: self.state_names(),
            state_defaults: self.states.iter().map(|s| s.default).collect(),
            params: self.params.clone(),
            time_dependent: self.time_dependent,
        }
    }
}

pub(crate) struct FdScratch {
    y: Vec<f64>,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl FdScratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            y: vec![0.0; n],
            plus: vec![0.0; n],
            minus: vec![0.0; n],
        }
    }
}

/// Serialized description of a system, as listed by the catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    pub description: String,
    pub dim: usize,
    pub state_names: Vec<String>,
    pub state_defaults: Vec<Option<f64>>,
    pub params: Vec<ParamDescriptor>,
    pub time_dependent: bool,
}

/// One element of `S = P × I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub system_id: String,
    pub param_values: Vec<f64>,
    pub initial_state: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordKind {
    Parameter,
    InitialCondition,
}

/// Prefix addressing initial-condition coordinates, e.g. `ic.x`.
pub const IC_PREFIX: &str = "ic.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCoord {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub kind: CoordKind,
}

impl BoxCoord {
    /// Kind is inferred from the name: `ic.<state>` is an initial
    /// condition, anything else a parameter.
    pub fn new(name: &str, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(invalid(format!("bounds for `{name}` need lo < hi, got {lo}:{hi}")));
        }
        let kind = if name.starts_with(IC_PREFIX) {
            CoordKind::InitialCondition
        } else {
            CoordKind::Parameter
        };
        Ok(Self {
            name: name.to_owned(),
            lo,
            hi,
            kind,
        })
    }

    /// Parses `name=lo:hi`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, range) = spec
            .split_once('=')
            .ok_or_else(|| invalid(format!("expected name=lo:hi, got `{spec}`")))?;
        let (lo, hi) = parse_range(range)?;
        Self::new(name.trim(), lo, hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

pub fn parse_range(range: &str) -> Result<(f64, f64)> {
    let (lo, hi) = range
        .split_once(':')
        .ok_or_else(|| invalid(format!("expected lo:hi, got `{range}`")))?;
    let lo = lo
        .trim()
        .parse::<f64>()
        .map_err(|e| invalid(format!("bad lower bound `{lo}`: {e}")))?;
    let hi = hi
        .trim()
        .parse::<f64>()
        .map_err(|e| invalid(format!("bad upper bound `{hi}`: {e}")))?;
    Ok((lo, hi))
}

/// Rectangular search region over a subset of the coordinates of `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub coords: Vec<BoxCoord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordTarget {
    Param(usize),
    State(usize),
}

impl SearchBox {
    pub fn new(coords: Vec<BoxCoord>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("search box has no coordinates"));
        }
        for c in &coords {
            if !(c.lo.is_finite() && c.hi.is_finite()) || c.lo >= c.hi {
                return Err(invalid(format!("bounds for `{}` need lo < hi", c.name)));
            }
        }
        let mut names: Vec<&str> = coords.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("duplicate coordinate in search box"));
        }
        Ok(Self { coords })
    }

    pub fn parse<S: AsRef<str>>(specs: &[S]) -> Result<Self> {
        let coords = specs
            .iter()
            .map(|s| BoxCoord::parse(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.coords.iter().map(|c| c.name.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&BoxCoord> {
        self.coords.iter().find(|c| c.name == name)
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.coords.len()
            && self.coords.iter().zip(values).all(|(c, &v)| c.contains(v))
    }

    /// `true` when every coordinate of `self` appears in `outer` with
    /// bounds no wider than the outer ones, and the coordinate sets match.
    pub fn is_within(&self, outer: &SearchBox) -> bool {
        self.coords.len() == outer.coords.len()
            && self.coords.iter().all(|c| {
                outer
                    .get(&c.name)
                    .is_some_and(|o| o.kind == c.kind && c.lo >= o.lo && c.hi <= o.hi)
            })
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.coords.iter().map(|c| 0.5 * (c.lo + c.hi)).collect()
    }

    /// Resolves coordinate names against a system.
    pub fn bind(&self, system: &SystemDefinition) -> Result<BoundBox> {
        let targets = self
            .coords
            .iter()
            .map(|c| resolve_coord(system, &c.name, c.kind))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundBox {
            search_box: self.clone(),
            targets,
        })
    }
}

pub fn resolve_coord(system: &SystemDefinition, name: &str, kind: CoordKind) -> Result<CoordTarget> {
    let unknown = || Error::UnknownCoordinate {
        system: system.id().to_owned(),
        name: name.to_owned(),
    };
    match kind {
        CoordKind::InitialCondition => name
            .strip_prefix(IC_PREFIX)
            .and_then(|s| system.state_index(s))
            .map(CoordTarget::State)
            .ok_or_else(unknown),
        CoordKind::Parameter => system
            .param_index(name)
            .map(CoordTarget::Param)
            .ok_or_else(unknown),
    }
}

/// A search box whose coordinates have been resolved against one system.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundBox {
    pub search_box: SearchBox,
    pub targets: Vec<CoordTarget>,
}

impl BoundBox {
    /// Writes box coordinates into a copy of `base`.
    pub fn apply(&self, base: &SamplePoint, values: &[f64]) -> SamplePoint {
        let mut out = base.clone();
        self.apply_in_place(&mut out, values);
        out
    }

    pub fn apply_in_place(&self, point: &mut SamplePoint, values: &[f64]) {
        for (t, &v) in self.targets.iter().zip(values) {
            match *t {
                CoordTarget::Param(i) => point.param_values[i] = v,
                CoordTarget::State(i) => point.initial_state[i] = v,
            }
        }
    }

    pub fn project(&self, point: &SamplePoint) -> Vec<f64> {
        self.targets
            .iter()
            .map(|t| match *t {
                CoordTarget::Param(i) => point.param_values[i],
                CoordTarget::State(i) => point.initial_state[i],
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Diag;

    impl VectorField for Diag {
        fn rhs(&self, _t: f64, y: &[f64], p: &[f64], dy: &mut [f64]) {
            dy[0] = p[0] * y[0];
            dy[1] = p[1] * y[1];
        }
    }

    fn diag() -> SystemDefinition {
        SystemDefinition::new(
            "d",
            "",
            vec![
                StateDescriptor { name: "u".into(), default: Some(1.0) },
                StateDescriptor { name: "v".into(), default: Some(1.0) },
            ],
            vec![
                ParamDescriptor::new("l1", -1.0, "1/time", ""),
                ParamDescriptor::new("l2", -2.0, "1/time", ""),
            ],
            false,
            Arc::new(Diag),
        )
        .unwrap()
    }

    #[test]
    fn fd_jacobian_used_when_no_closed_form() {
        let sys = diag();
        assert!(!sys.has_analytic_jacobian());
        let j = sys.eval_jacobian(0.0, &[3.0, -7.0], &[-1.0, -2.0]).unwrap();
        assert!((j.get(0, 0) + 1.0).abs() < 1e-8);
        assert!((j.get(1, 1) + 2.0).abs() < 1e-8);
        assert!(j.get(0, 1).abs() < 1e-8);
        let s = sys.default_sample().unwrap();
        assert!((sys.divergence_at(&s).unwrap() + 3.0).abs() < 1e-8);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let sys = diag();
        assert!(matches!(
            sys.eval_rhs(0.0, &[1.0], &[1.0, 1.0]),
            Err(Error::Dimension { what: "state", .. })
        ));
        assert!(matches!(
            sys.eval_rhs(0.0, &[1.0, 1.0], &[1.0]),
            Err(Error::Dimension { what: "params", .. })
        ));
    }

    #[test]
    fn box_parsing_and_binding() {
        let sys = diag();
        let b = SearchBox::parse(&["l1=-2:0", "ic.v=0.5:1.5"]).unwrap();
        assert_eq!(b.coords[1].kind, CoordKind::InitialCondition);
        let bound = b.bind(&sys).unwrap();
        assert_eq!(bound.targets, vec![CoordTarget::Param(0), CoordTarget::State(1)]);
        let base = sys.default_sample().unwrap();
        let p = bound.apply(&base, &[-1.5, 0.75]);
        assert_eq!(p.param_values, vec![-1.5, -2.0]);
        assert_eq!(p.initial_state, vec![1.0, 0.75]);
        assert_eq!(bound.project(&p), vec![-1.5, 0.75]);

        assert!(SearchBox::parse(&["nope=0:1"]).unwrap().bind(&sys).is_err());
        assert!(SearchBox::parse(&["ic.w=0:1"]).unwrap().bind(&sys).is_err());
        assert!(BoxCoord::parse("l1=1:0").is_err());
        assert!(BoxCoord::parse("l1").is_err());
        assert!(SearchBox::parse::<&str>(&[]).is_err());
    }

    #[test]
    fn containment() {
        let outer = SearchBox::parse(&["a=0:1", "b=0:1"]).unwrap();
        let inner = SearchBox::parse(&["b=0.25:0.75", "a=0:0.5"]).unwrap();
        assert!(inner.is_within(&outer));
        assert!(outer.is_within(&outer));
        let wide = SearchBox::parse(&["a=0:1.5", "b=0:1"]).unwrap();
        assert!(!wide.is_within(&outer));
        let fewer = SearchBox::parse(&["a=0:1"]).unwrap();
        assert!(!fewer.is_within(&outer));
    }
}
