//! Tensors that `statman eval` can print.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statman_core::curvature::{
    covariant_derivative, div_k, lower04, ricci, riemann, statistical_curvature, ProjectivePack,
};
use statman_core::{Chart, ConnectionKind, Point, Tensor, Variance};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    Metric,
    InverseMetric,
    Cubic,
    DifferenceTensor,
    GammaHat,
    Gamma,
    GammaStar,
    GammaAlpha(f64),
    R,
    RStar,
    RHat,
    RAlpha(f64),
    Ric,
    RicStar,
    Tau,
    DivK,
    S,
    P,
    PStar,
    Cot,
}

pub const QUANTITY_NAMES: &str =
    "g, ginv, C, K, gamma_hat, gamma, gamma_star, gamma_alpha:<a>, R, Rstar, Rhat, Ralpha:<a>, Ric, Ricstar, tau, divK, S, P, Pstar, Cot";

impl FromStr for Quantity {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("unknown quantity '{s}'; expected one of {QUANTITY_NAMES}"));
        if let Some((head, a)) = s.split_once(':') {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            if !a.is_finite() {
                return Err(bad());
            }
            return match head {
                "gamma_alpha" => Ok(Quantity::GammaAlpha(a)),
                "Ralpha" => Ok(Quantity::RAlpha(a)),
                _ => Err(bad()),
            };
        }
        Ok(match s {
            "g" => Quantity::Metric,
            "ginv" => Quantity::InverseMetric,
            "C" => Quantity::Cubic,
            "K" => Quantity::DifferenceTensor,
            "gamma_hat" => Quantity::GammaHat,
            "gamma" => Quantity::Gamma,
            "gamma_star" => Quantity::GammaStar,
            "R" => Quantity::R,
            "Rstar" => Quantity::RStar,
            "Rhat" => Quantity::RHat,
            "Ric" => Quantity::Ric,
            "Ricstar" => Quantity::RicStar,
            "tau" => Quantity::Tau,
            "divK" => Quantity::DivK,
            "S" => Quantity::S,
            "P" => Quantity::P,
            "Pstar" => Quantity::PStar,
            "Cot" => Quantity::Cot,
            _ => return Err(bad()),
        })
    }
}

impl Quantity {
    /// Whether `--conn` selects the connection.
    pub fn uses_connection(self) -> bool {
        matches!(
            self,
            Quantity::Gamma | Quantity::R | Quantity::Ric | Quantity::P | Quantity::Cot
        )
    }

    fn symbol(self) -> String {
        match self {
            Quantity::Metric => "g".into(),
            Quantity::InverseMetric => "ginv".into(),
            Quantity::Cubic => "C".into(),
            Quantity::DifferenceTensor => "K".into(),
            Quantity::GammaHat => "gamma_hat".into(),
            Quantity::Gamma => "gamma".into(),
            Quantity::GammaStar => "gamma_star".into(),
            Quantity::GammaAlpha(a) => format!("gamma_alpha:{a}"),
            Quantity::R => "R".into(),
            Quantity::RStar => "Rstar".into(),
            Quantity::RHat => "Rhat".into(),
            Quantity::RAlpha(a) => format!("Ralpha:{a}"),
            Quantity::Ric => "Ric".into(),
            Quantity::RicStar => "Ricstar".into(),
            Quantity::Tau => "tau".into(),
            Quantity::DivK => "divK".into(),
            Quantity::S => "S".into(),
            Quantity::P => "P".into(),
            Quantity::PStar => "Pstar".into(),
            Quantity::Cot => "Cot".into(),
        }
    }
}

/// Components of one evaluated tensor, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorDump {
    pub quantity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<ConnectionKind>,
    pub point: Vec<f64>,
    pub dim: usize,
    pub variance: Vec<Variance>,
    pub components: Vec<f64>,
}

pub fn parse_point(src: &str, dim: usize) -> Result<Point, CliError> {
    let coords = src
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("cannot parse point '{src}'")))?;
    if coords.len() != dim {
        return Err(CliError::Usage(format!(
            "point '{src}' has {} coordinates, the chart has {dim}",
            coords.len()
        )));
    }
    Point::new(coords).map_err(|e| CliError::Usage(e.to_string()))
}

/// Evaluates `q` at `p`; evaluation failures (outside the domain, singular
/// metric) are reported as bad points.
pub fn evaluate(chart: &Chart, p: &Point, q: Quantity, conn: ConnectionKind) -> Result<TensorDump, CliError> {
    let bad_point = |e: statman_core::Error| CliError::Usage(format!("cannot evaluate at {:?}: {e}", p.coords()));
    let geo = chart.local(p).map_err(bad_point)?;
    let curvature = |kind| riemann(&geo.connection(kind)).values();
    let projective = |kind| ProjectivePack::new(&geo.connection(kind)).map_err(bad_point);
    let t: Tensor = match q {
        Quantity::Metric => geo.metric.g.clone(),
        Quantity::InverseMetric => geo.metric.g_inv.clone(),
        Quantity::Cubic => geo.cubic.values(),
        Quantity::DifferenceTensor => geo.k.values(),
        Quantity::GammaHat => geo.connection(ConnectionKind::LeviCivita).values(),
        Quantity::Gamma => geo.connection(conn).values(),
        Quantity::GammaStar => geo.connection(ConnectionKind::NablaStar).values(),
        Quantity::GammaAlpha(a) => geo.connection(ConnectionKind::Alpha(a)).values(),
        Quantity::R => curvature(conn),
        Quantity::RStar => curvature(ConnectionKind::NablaStar),
        Quantity::RHat => curvature(ConnectionKind::LeviCivita),
        Quantity::RAlpha(a) => curvature(ConnectionKind::Alpha(a)),
        Quantity::Ric => ricci(&curvature(conn)),
        Quantity::RicStar => ricci(&curvature(ConnectionKind::NablaStar)),
        Quantity::Tau => geo.tau().values(),
        Quantity::DivK => div_k(&covariant_derivative(&geo.k, &geo.connection(ConnectionKind::LeviCivita)).values()),
        Quantity::S => {
            let g = &geo.metric.g;
            statistical_curvature(
                &lower04(&curvature(ConnectionKind::Nabla), g),
                &lower04(&curvature(ConnectionKind::NablaStar), g),
            )
        }
        Quantity::P => projective(conn)?.p,
        Quantity::PStar => projective(ConnectionKind::NablaStar)?.p,
        Quantity::Cot => projective(conn)?.cot,
    };
    Ok(TensorDump {
        quantity: q.symbol(),
        connection: q.uses_connection().then_some(conn),
        point: p.coords().to_vec(),
        dim: t.dim(),
        variance: t.variance().to_vec(),
        components: t.data().to_vec(),
    })
}

/// One line per component, indices labelled by coordinate name, e.g.
/// `gamma^r_{t t} = -2`.
pub fn render(dump: &TensorDump, coords: &[String]) -> String {
    let mut out = String::new();
    let conn = dump.connection.map(|c| format!(" [{c}]")).unwrap_or_default();
    let _ = writeln!(out, "{}{} at {:?}", dump.quantity, conn, dump.point);
    let rank = dump.variance.len();
    let n = dump.dim;
    for (flat, value) in dump.components.iter().enumerate() {
        let mut idx = vec![0; rank];
        let mut rest = flat;
        for s in (0..rank).rev() {
            idx[s] = rest % n;
            rest /= n;
        }
        let upper: Vec<&str> = (0..rank)
            .filter(|&s| dump.variance[s] == Variance::Upper)
            .map(|s| coords[idx[s]].as_str())
            .collect();
        let lower: Vec<&str> = (0..rank)
            .filter(|&s| dump.variance[s] == Variance::Lower)
            .map(|s| coords[idx[s]].as_str())
            .collect();
        let mut label = dump.quantity.clone();
        if !upper.is_empty() {
            let _ = write!(label, "^{{{}}}", upper.join(" "));
        }
        if !lower.is_empty() {
            let _ = write!(label, "_{{{}}}", lower.join(" "));
        }
        let _ = writeln!(out, "  {label} = {value:.15e}");
    }
    out
}
