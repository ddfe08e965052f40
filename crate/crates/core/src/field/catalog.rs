//! Builtin field pairs plus a registry for user-defined fields.

use std::collections::BTreeMap;

use crate::config::{Document, Section};
use crate::flow::oracle::{self, HelixField};
use crate::flow::FlowOutcome;
use crate::linalg::Matrix;
use crate::{Error, Result, Scalar};

use super::expr::expression_field;
use super::{FieldPair, ScalarFn, SingularComponent, SingularSet, VectorField};

pub const HELIX: &str = "helix";
pub const GRAPH_FOLIATION_SIN_COS: &str = "graph_foliation(f=sin x cos y)";
pub const COMMUTING_LINEAR: &str = "commuting_linear";
pub const ROTATION_PAIR: &str = "rotation_pair";
pub const WINDOWED_SWIRL: &str = "windowed_swirl";
pub const PULSED_ROTATION: &str = "pulsed_rotation";

/// Singular set of the helix pair: the plane `{x = 0}` where `arctan(y/x)`
/// jumps, tagged with the `z` axis inside it where the speed blows up.
pub fn helix_singular_set<T: Scalar>() -> SingularSet<T> {
    SingularSet::new(vec![
        SingularComponent::coordinate_plane(3, 0, T::zero()),
        SingularComponent::line(vec![T::zero(); 3], vec![T::zero(), T::zero(), T::one()]),
    ])
}

/// `V1 = d/dx - y/(x^2+y^2) d/dz`.
pub fn helix_v1<T: Scalar>() -> VectorField<T> {
    VectorField::new("helix.V1", 3, |p: &[T], _| {
        let r2 = p[0] * p[0] + p[1] * p[1];
        vec![T::one(), T::zero(), -p[1] / r2]
    })
    .with_jacobian(|p: &[T], _| {
        let (x, y) = (p[0], p[1]);
        let r2 = x * x + y * y;
        let r4 = r2 * r2;
        let mut j = Matrix::zeros(3, 3);
        j[(2, 0)] = T::lit(2.0) * x * y / r4;
        j[(2, 1)] = (y * y - x * x) / r4;
        j
    })
    .with_divergence(|_, _| T::zero())
    .with_oracle(|p: &[T], t: T| oracle::analytic_flow_helix_outcome(HelixField::First, p, t))
    .with_singular_set(helix_singular_set())
}

/// `V2 = d/dy + x/(x^2+y^2) d/dz`.
pub fn helix_v2<T: Scalar>() -> VectorField<T> {
    VectorField::new("helix.V2", 3, |p: &[T], _| {
        let r2 = p[0] * p[0] + p[1] * p[1];
        vec![T::zero(), T::one(), p[0] / r2]
    })
    .with_jacobian(|p: &[T], _| {
        let (x, y) = (p[0], p[1]);
        let r2 = x * x + y * y;
        let r4 = r2 * r2;
        let mut j = Matrix::zeros(3, 3);
        j[(2, 0)] = (y * y - x * x) / r4;
        j[(2, 1)] = -T::lit(2.0) * x * y / r4;
        j
    })
    .with_divergence(|_, _| T::zero())
    .with_oracle(|p: &[T], t: T| oracle::analytic_flow_helix_outcome(HelixField::Second, p, t))
    .with_singular_set(helix_singular_set())
}

pub fn helix_pair<T: Scalar>() -> FieldPair<T> {
    FieldPair::new(HELIX, helix_v1(), helix_v2(), true).expect("same dimension")
}

/// `V1 = d/dx + f_x d/dz`, `V2 = d/dy + f_y d/dz` for a scalar `f(x, y)`.
///
/// Needs the Hessian of `f` for analytic Jacobians.
pub fn graph_foliation_pair<T: Scalar>(f: ScalarFn<T>) -> Result<FieldPair<T>> {
    if f.dim != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: f.dim,
        });
    }
    let name = format!("graph_foliation(f={})", f.name);
    let make = |which: usize| -> VectorField<T> {
        let fe = f.clone();
        let fj = f.clone();
        let fo = f.clone();
        let mut field = VectorField::new(format!("{name}.V{}", which + 1), 3, move |p: &[T], _| {
            let g = fe.gradient(&p[..2]);
            let mut v = vec![T::zero(); 3];
            v[which] = T::one();
            v[2] = g[which];
            v
        })
        .with_divergence(|_, _| T::zero())
        .with_oracle(move |p: &[T], t: T| {
            let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
            oracle::analytic_flow_graph_foliation(&fo, which + 1, p, t, tol)
                .map(FlowOutcome::uncrossed)
        });
        if fj.has_hessian() {
            field = field.with_jacobian(move |p: &[T], _| {
                let h = fj.hessian(&p[..2]).expect("hessian present");
                let mut j = Matrix::zeros(3, 3);
                j[(2, 0)] = h[(which, 0)];
                j[(2, 1)] = h[(which, 1)];
                j
            });
        }
        field
    };
    FieldPair::new(name.clone(), make(0), make(1), true)
}

pub fn linear_field<T: Scalar>(name: &str, a: Matrix<T>) -> VectorField<T> {
    let d = a.rows();
    let (a1, a2, a3) = (a.clone(), a.clone(), a.clone());
    let trace = a.trace();
    VectorField::new(name, d, move |x: &[T], _| a1.mul_vec(x))
        .with_jacobian(move |_, _| a2.clone())
        .with_divergence(move |_, _| trace)
        .with_oracle(move |x: &[T], t: T| {
            Ok(FlowOutcome::uncrossed(a3.scaled(t).expm().mul_vec(x)))
        })
}

/// `V1 = A x` (rotation about the z axis), `V2 = B x` with `B = diag(1/2, 1/2, -1)`.
/// `AB = BA` and both are trace free.
pub fn commuting_linear_pair<T: Scalar>() -> FieldPair<T> {
    let a = Matrix::from_f64_rows(&[&[0.0, -1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
    let b = Matrix::from_f64_rows(&[&[0.5, 0.0, 0.0], &[0.0, 0.5, 0.0], &[0.0, 0.0, -1.0]]);
    FieldPair::new(
        COMMUTING_LINEAR,
        linear_field("commuting_linear.V1", a),
        linear_field("commuting_linear.V2", b),
        true,
    )
    .expect("same dimension")
}

fn rotation_z<T: Scalar>(p: &[T], angle: T) -> Vec<T> {
    let (s, c) = angle.sin_cos();
    vec![c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}

/// Rotation about the z axis and unit translation along it.
pub fn rotation_pair<T: Scalar>() -> FieldPair<T> {
    let a = Matrix::from_f64_rows(&[&[0.0, -1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
    let lift = VectorField::new("rotation_pair.V2", 3, |_, _| {
        vec![T::zero(), T::zero(), T::one()]
    })
    .with_jacobian(|_, _| Matrix::zeros(3, 3))
    .with_divergence(|_, _| T::zero())
    .with_oracle(|p: &[T], t: T| Ok(FlowOutcome::uncrossed(vec![p[0], p[1], p[2] + t])));
    FieldPair::new(
        ROTATION_PAIR,
        linear_field("rotation_pair.V1", a),
        lift,
        true,
    )
    .expect("same dimension")
}

fn window<T: Scalar>(p: &[T]) -> T {
    (-(p[0] * p[0] + p[1] * p[1]) / T::lit(2.0)).exp()
}

/// Gaussian-windowed pair: `V1 = phi(r) (-y, x, 0)` rotates each cylinder at its
/// own rate, `V2 = (0, 0, phi(r))` lifts it; `phi(r) = exp(-r^2/2)`. Both are
/// smooth, divergence free, and commute.
pub fn windowed_swirl_pair<T: Scalar>() -> FieldPair<T> {
    let swirl = VectorField::new("windowed_swirl.V1", 3, |p: &[T], _| {
        let w = window(p);
        vec![-p[1] * w, p[0] * w, T::zero()]
    })
    .with_jacobian(|p: &[T], _| {
        let w = window(p);
        let (x, y) = (p[0], p[1]);
        Matrix::from_rows(&[
            &[x * y * w, (y * y - T::one()) * w, T::zero()],
            &[(T::one() - x * x) * w, -x * y * w, T::zero()],
            &[T::zero(), T::zero(), T::zero()],
        ])
    })
    .with_divergence(|_, _| T::zero())
    .with_oracle(|p: &[T], s: T| Ok(FlowOutcome::uncrossed(rotation_z(p, window(p) * s))));
    let lift = VectorField::new("windowed_swirl.V2", 3, |p: &[T], _| {
        vec![T::zero(), T::zero(), window(p)]
    })
    .with_jacobian(|p: &[T], _| {
        let w = window(p);
        let mut j = Matrix::zeros(3, 3);
        j[(2, 0)] = -p[0] * w;
        j[(2, 1)] = -p[1] * w;
        j
    })
    .with_divergence(|_, _| T::zero())
    .with_oracle(|p: &[T], t: T| {
        Ok(FlowOutcome::uncrossed(vec![
            p[0],
            p[1],
            p[2] + window(p) * t,
        ]))
    });
    FieldPair::new(WINDOWED_SWIRL, swirl, lift, true).expect("same dimension")
}

/// Time-dependent rotation `(1 + sin(t)/2) (-y, x, 0)` paired with `d/dz`.
pub fn pulsed_rotation_pair<T: Scalar>() -> FieldPair<T> {
    let rate = |t: T| T::one() + t.sin() / T::lit(2.0);
    let rot = VectorField::new("pulsed_rotation.V1", 3, move |p: &[T], t: T| {
        let k = rate(t);
        vec![-p[1] * k, p[0] * k, T::zero()]
    })
    .with_jacobian(move |_, t: T| {
        let k = rate(t);
        Matrix::from_rows(&[
            &[T::zero(), -k, T::zero()],
            &[k, T::zero(), T::zero()],
            &[T::zero(), T::zero(), T::zero()],
        ])
    })
    .with_divergence(|_, _| T::zero())
    .with_oracle(|p: &[T], s: T| {
        // angle = int_0^s (1 + sin/2) = s + (1 - cos s)/2
        let angle = s + (T::one() - s.cos()) / T::lit(2.0);
        Ok(FlowOutcome::uncrossed(rotation_z(p, angle)))
    })
    .time_dependent(true);
    let lift = VectorField::new("pulsed_rotation.V2", 3, |_, _| {
        vec![T::zero(), T::zero(), T::one()]
    })
    .with_jacobian(|_, _| Matrix::zeros(3, 3))
    .with_divergence(|_, _| T::zero())
    .with_oracle(|p: &[T], t: T| Ok(FlowOutcome::uncrossed(vec![p[0], p[1], p[2] + t])));
    FieldPair::new(PULSED_ROTATION, rot, lift, true).expect("same dimension")
}

/// All builtin pairs.
pub fn builtin_catalog<T: Scalar>() -> Vec<FieldPair<T>> {
    vec![
        helix_pair(),
        graph_foliation_pair(ScalarFn::sin_cos()).expect("2d scalar"),
        commuting_linear_pair(),
        rotation_pair(),
        windowed_swirl_pair(),
        pulsed_rotation_pair(),
    ]
}

/// Standalone builtin fields (not part of a pair).
pub fn builtin_fields<T: Scalar>() -> Vec<VectorField<T>> {
    vec![
        linear_field("dilation", Matrix::identity(3)),
        linear_field(
            "saddle",
            Matrix::from_f64_rows(&[&[1.0, 0.0], &[0.0, -1.0]]),
        ),
        linear_field(
            "rotation2",
            Matrix::from_f64_rows(&[&[0.0, -1.0], &[1.0, 0.0]]),
        ),
        VectorField::new("zero3", 3, |_, _| vec![T::zero(); 3])
            .with_jacobian(|_, _| Matrix::zeros(3, 3))
            .with_divergence(|_, _| T::zero())
            .with_oracle(|p: &[T], _| Ok(FlowOutcome::uncrossed(p.to_vec()))),
    ]
}

/// Name-addressable collection of pairs and fields, builtin plus user-defined.
#[derive(Debug, Clone)]
pub struct Registry<T> {
    pairs: BTreeMap<String, FieldPair<T>>,
    fields: BTreeMap<String, VectorField<T>>,
}

impl<T: Scalar> Default for Registry<T> {
    fn default() -> Self {
        Self::builtin()
    }
}

impl<T: Scalar> Registry<T> {
    pub fn builtin() -> Self {
        let mut reg = Self {
            pairs: BTreeMap::new(),
            fields: BTreeMap::new(),
        };
        for p in builtin_catalog() {
            reg.insert_pair(p);
        }
        for f in builtin_fields() {
            reg.fields.insert(f.name().to_string(), f);
        }
        reg
    }

    pub fn insert_pair(&mut self, pair: FieldPair<T>) {
        self.fields
            .insert(pair.first.name().to_string(), pair.first.clone());
        self.fields
            .insert(pair.second.name().to_string(), pair.second.clone());
        self.pairs.insert(pair.name.clone(), pair);
    }

    pub fn insert_field(&mut self, field: VectorField<T>) {
        self.fields.insert(field.name().to_string(), field);
    }

    pub fn pair_names(&self) -> impl Iterator<Item = &str> {
        self.pairs.keys().map(String::as_str)
    }

    pub fn field_names(&self) -> impl Iterator<Item = &str> {
        self.fields.keys().map(String::as_str)
    }

    pub fn pairs(&self) -> impl Iterator<Item = &FieldPair<T>> {
        self.pairs.values()
    }

    pub fn pair(&self, name: &str) -> Result<&FieldPair<T>> {
        let key = if name == "graph_foliation" {
            GRAPH_FOLIATION_SIN_COS
        } else {
            name
        };
        self.pairs
            .get(key)
            .ok_or_else(|| Error::UnknownEntry(name.to_string()))
    }

    /// Field by name; `<pair>.1` and `<pair>.2` address pair members.
    pub fn field(&self, name: &str) -> Result<&VectorField<T>> {
        if let Some(f) = self.fields.get(name) {
            return Ok(f);
        }
        if let Some((pair, idx)) = name.rsplit_once('.') {
            let p = self.pair(pair)?;
            match idx {
                "1" | "V1" => return Ok(&p.first),
                "2" | "V2" => return Ok(&p.second),
                _ => {}
            }
        }
        Err(Error::UnknownEntry(name.to_string()))
    }

    /// Registers `[field NAME]` and `[pair NAME]` sections of a document.
    ///
    /// ```text
    /// [field twist]
    /// v1 = 1
    /// v2 = 0
    /// v3 = -y/(x^2+y^2)
    /// singular = plane 1 0 0 0; line 0 0 0 0 0 1
    /// exclusion = 1e-3
    ///
    /// [pair twist_pair]
    /// first = twist
    /// second = helix.V2
    /// bracket_vanishes_ae = true
    /// ```
    pub fn load_document(&mut self, doc: &Document) -> Result<()> {
        for s in doc.sections_of("field") {
            let f = parse_field_section(s)?;
            self.insert_field(f);
        }
        for s in doc.sections_of("pair").filter(|s| s.label.is_some()) {
            let name = s.label.clone().expect("filtered");
            let first = self.field(s.require("first")?)?.clone();
            let second = self.field(s.require("second")?)?.clone();
            let vanishes = s.parse_or("bracket_vanishes_ae", false)?;
            let pair = FieldPair::new(name, first, second, vanishes)?;
            self.insert_pair(pair);
        }
        Ok(())
    }
}

fn parse_field_section<T: Scalar>(s: &Section) -> Result<VectorField<T>> {
    let name = s.label.clone().ok_or_else(|| Error::Parse {
        line: s.line,
        message: "[field] sections need a name: `[field NAME]`".into(),
    })?;
    let mut comps = Vec::new();
    for i in 1.. {
        match s.get(&format!("v{i}")) {
            Some(e) => comps.push(e),
            None => break,
        }
    }
    if let Some(dim) = s.parse::<usize>("dim")? {
        if dim != comps.len() {
            return Err(Error::Parse {
                line: s.line,
                message: format!(
                    "field `{name}` declares dim = {dim} but has {} components",
                    comps.len()
                ),
            });
        }
    }
    let dim = comps.len();
    let mut components = Vec::new();
    if let Some(spec) = s.get("singular") {
        for piece in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            components.push(
                parse_singular_piece(piece, dim).map_err(|message| Error::Parse {
                    line: s.entry("singular").map_or(s.line, |e| e.line),
                    message,
                })?,
            );
        }
    }
    let mut singular = SingularSet::new(components);
    if let Some(eps) = s.parse::<f64>("exclusion")? {
        singular = singular.with_exclusion(T::lit(eps));
    }
    expression_field(&name, &comps, singular).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            line: s.line,
            message,
        },
        other => other,
    })
}

fn parse_singular_piece<T: Scalar>(
    piece: &str,
    dim: usize,
) -> std::result::Result<SingularComponent<T>, String> {
    let mut words = piece.split_whitespace();
    let kind = words.next().unwrap_or_default();
    let nums = crate::config::parse_number_list(&words.collect::<Vec<_>>().join(" "))?;
    let cast = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
    match kind {
        "plane" if nums.len() == dim + 1 => Ok(SingularComponent::hyperplane(
            cast(&nums[..dim]),
            T::lit(nums[dim]),
        )),
        "line" if nums.len() == 2 * dim => Ok(SingularComponent::line(
            cast(&nums[..dim]),
            cast(&nums[dim..]),
        )),
        "plane" => Err(format!("plane needs {} numbers (normal, offset)", dim + 1)),
        "line" => Err(format!("line needs {} numbers (point, direction)", 2 * dim)),
        other => Err(format!("unknown singular component `{other}`")),
    }
}
