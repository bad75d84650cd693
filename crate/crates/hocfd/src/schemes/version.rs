//! The standard second-order scheme and the four high-order compact
//! versions.
//!
//! Starting from the second-order central residual
//!
//!   f = A0 - (a1 dx1^2/12) u_1111 - (a2 dx2^2/12) u_2222
//!          - (b12 dx1^2/6) u_1112 - (b12 dx2^2/6) u_1222
//!          - (c1 dx1^2/6) u_111  - (c2 dx2^2/6) u_222 + O(h^4),
//!
//! the auxiliary relations remove all correction terms except one fourth
//! derivative, which each version drops:
//!
//!   V1 drops u_1111, V2 drops u_2222, V3 drops u_1112, V4 drops u_1222.
//!
//! When a1 = a2 or b12 = 0 the dropped term's contribution is O(h^4) and the
//! schemes are fourth-order consistent; otherwise second-order with an
//! O(h^2) remainder whose prefactor (`remainder_coefficient`) is the
//! essentially-high-order-compact diagnostic.

use crate::coeffs::CoefficientField;
use crate::error::{Error, Result};
use crate::stencil::{DualStencil, ScaledOps};

use super::aux::{aux_fourth, aux_third, denom_floor, Axis, FourthKind};

/// Scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeVersion {
    /// Plain second-order central differences (no correction terms).
    Standard,
    V1,
    V2,
    V3,
    V4,
}

impl SchemeVersion {
    pub const ALL: [SchemeVersion; 5] = [
        SchemeVersion::Standard,
        SchemeVersion::V1,
        SchemeVersion::V2,
        SchemeVersion::V3,
        SchemeVersion::V4,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeVersion::Standard => "standard",
            SchemeVersion::V1 => "v1",
            SchemeVersion::V2 => "v2",
            SchemeVersion::V3 => "v3",
            SchemeVersion::V4 => "v4",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" | "sd" => Ok(SchemeVersion::Standard),
            "v1" => Ok(SchemeVersion::V1),
            "v2" => Ok(SchemeVersion::V2),
            "v3" => Ok(SchemeVersion::V3),
            "v4" => Ok(SchemeVersion::V4),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (expected standard, v1, v2, v3 or v4)"
            ))),
        }
    }

    /// The fourth derivative left as the second-order remainder, if any.
    pub fn remainder(&self) -> Option<&'static str> {
        match self {
            SchemeVersion::Standard => None,
            SchemeVersion::V1 => Some("u_x1x1x1x1"),
            SchemeVersion::V2 => Some("u_x2x2x2x2"),
            SchemeVersion::V3 => Some("u_x1x1x1x2"),
            SchemeVersion::V4 => Some("u_x1x2x2x2"),
        }
    }

    pub fn is_hoc(&self) -> bool {
        !matches!(self, SchemeVersion::Standard)
    }
}

/// Assembles the full node stencil of a scheme version at (i, j).
///
/// The returned dual satisfies `mass . U_tau + space . U = 0` as the node
/// equation; each row is normalized by d so the u_tau contribution of f has
/// unit center weight. For the standard scheme this reduces to the identity
/// mass paired with A0/d.
pub fn assemble_version(
    v: SchemeVersion,
    cf: &CoefficientField,
    i: usize,
    j: usize,
) -> Result<DualStencil> {
    let h = cf.grid.h;
    let ops = ScaledOps::new(h, h);
    assemble_version_with_ops(v, cf, &ops, i, j).map_err(|e| e.at_node(i, j))
}

pub(crate) fn assemble_version_with_ops(
    v: SchemeVersion,
    cf: &CoefficientField,
    ops: &ScaledOps,
    i: usize,
    j: usize,
) -> Result<DualStencil> {
    let cs = cf.at(i, j);
    let floor = denom_floor(cf);
    let (dx1, dx2) = (cf.grid.h, cf.grid.h);
    let (q1, q2) = (dx1 * dx1, dx2 * dx2);

    // A0: the plain central discretisation of the spatial operator.
    let mut combo = DualStencil::zero();
    combo.add_space(cs.a1.v, &ops.d11);
    combo.add_space(cs.a2.v, &ops.d22);
    combo.add_space(cs.b12.v, &ops.d12);
    combo.add_space(cs.c1.v, &ops.d1);
    combo.add_space(cs.c2.v, &ops.d2);

    if v.is_hoc() {
        let a1rel = aux_third(cs, ops, Axis::X1, floor)?;
        let a2rel = aux_third(cs, ops, Axis::X2, floor)?;
        combo.add_scaled(-(cs.c1.v * q1 / 6.0), &a1rel.dual);
        combo.add_scaled(-(cs.c2.v * q2 / 6.0), &a2rel.dual);

        match v {
            SchemeVersion::V1 => {
                let b1 = aux_fourth(cs, ops, FourthKind::B1, floor)?;
                let b2 = aux_fourth(cs, ops, FourthKind::B2, floor)?;
                let c2 = aux_fourth(cs, ops, FourthKind::C2, floor)?;
                let ra2 = recip_checked("a2", cs.a2.v, floor)?;
                combo.add_scaled(-(cs.a2.v * q2 / 12.0), &b2.dual);
                combo.add_scaled(-(cs.b12.v * q2 / 12.0), &c2.dual);
                let b1_coeff = cs.a1.v * (2.0 * cs.a2.v * q1 - cs.a1.v * q2) * ra2 / 12.0;
                combo.add_scaled(-b1_coeff, &b1.dual);
            }
            SchemeVersion::V2 => {
                let b1 = aux_fourth(cs, ops, FourthKind::B1, floor)?;
                let b2 = aux_fourth(cs, ops, FourthKind::B2, floor)?;
                let c1 = aux_fourth(cs, ops, FourthKind::C1, floor)?;
                let ra1 = recip_checked("a1", cs.a1.v, floor)?;
                combo.add_scaled(-(cs.a1.v * q1 / 12.0), &b1.dual);
                combo.add_scaled(-(cs.b12.v * q1 / 12.0), &c1.dual);
                let b2_coeff = cs.a2.v * (2.0 * cs.a1.v * q2 - cs.a2.v * q1) * ra1 / 12.0;
                combo.add_scaled(-b2_coeff, &b2.dual);
            }
            SchemeVersion::V3 => {
                let b1 = aux_fourth(cs, ops, FourthKind::B1, floor)?;
                let b2 = aux_fourth(cs, ops, FourthKind::B2, floor)?;
                let c2 = aux_fourth(cs, ops, FourthKind::C2, floor)?;
                combo.add_scaled(-(cs.a1.v * q1 / 12.0), &b1.dual);
                combo.add_scaled(-(cs.a2.v * q2 / 12.0), &b2.dual);
                combo.add_scaled(-(cs.b12.v * q2 / 12.0), &c2.dual);
            }
            SchemeVersion::V4 => {
                let b1 = aux_fourth(cs, ops, FourthKind::B1, floor)?;
                let b2 = aux_fourth(cs, ops, FourthKind::B2, floor)?;
                let c1 = aux_fourth(cs, ops, FourthKind::C1, floor)?;
                combo.add_scaled(-(cs.a1.v * q1 / 12.0), &b1.dual);
                combo.add_scaled(-(cs.a2.v * q2 / 12.0), &b2.dual);
                combo.add_scaled(-(cs.b12.v * q1 / 12.0), &c1.dual);
            }
            SchemeVersion::Standard => unreachable!(),
        }
    }

    // Move f = -d u_tau to the stencil side (adds +d at the mass center),
    // then normalize the row by d.
    combo.mass.w[1][1] += cs.d.v;
    combo.scale(1.0 / cs.d.v);
    Ok(combo)
}

fn recip_checked(name: &'static str, v: f64, floor: f64) -> Result<f64> {
    if v.abs() <= floor {
        return Err(Error::ZeroDenominator {
            name,
            value: v,
            threshold: floor,
        });
    }
    Ok(1.0 / v)
}

/// Magnitude of the dropped term's prefactor at a node, the EHOC
/// diagnostic. Reported unnormalized (no division by d).
pub fn remainder_coefficient(
    v: SchemeVersion,
    cf: &CoefficientField,
    i: usize,
    j: usize,
    h: f64,
) -> Result<f64> {
    let cs = cf.at(i, j);
    let floor = denom_floor(cf);
    let (q1, q2) = (h * h, h * h);
    let val = match v {
        SchemeVersion::Standard => {
            return Err(Error::InvalidInput(
                "remainder_coefficient is defined for the HOC versions only".into(),
            ))
        }
        SchemeVersion::V1 => {
            cs.a1.v * (cs.a2.v * q1 - cs.a1.v * q2) * recip_checked("a2", cs.a2.v, floor)? / 12.0
        }
        SchemeVersion::V2 => {
            cs.a2.v * (cs.a1.v * q2 - cs.a2.v * q1) * recip_checked("a1", cs.a1.v, floor)? / 12.0
        }
        SchemeVersion::V3 => {
            cs.b12.v * (cs.a1.v * q2 - cs.a2.v * q1) * recip_checked("a2", cs.a2.v, floor)? / 12.0
        }
        SchemeVersion::V4 => {
            cs.b12.v * (cs.a2.v * q1 - cs.a1.v * q2) * recip_checked("a1", cs.a1.v, floor)? / 12.0
        }
    };
    Ok(val.abs())
}

/// Max of `remainder_coefficient` over all grid nodes.
pub fn remainder_coefficient_max(v: SchemeVersion, cf: &CoefficientField) -> Result<f64> {
    let mut m = 0.0f64;
    for j in 0..cf.grid.ny() {
        for i in 0..cf.grid.nx() {
            m = m.max(remainder_coefficient(v, cf, i, j, cf.grid.h)?);
        }
    }
    Ok(m)
}
