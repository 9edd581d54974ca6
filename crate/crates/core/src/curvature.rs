//! Curvature tensors, covariant derivatives, projective invariants and the
//! identity suite.
//!
//! Slot conventions, used everywhere:
//! - connection coefficients `gamma[k][i][j] = Γ^k_ij`;
//! - curvature `r[l][i][j][k]` is the `∂_l` component of `R(∂_i, ∂_j)∂_k`;
//! - (0,4) forms `r04[x][y][z][w] = g(R(∂_x, ∂_y)∂_z, ∂_w)`;
//! - a covariant derivative prepends the derivative slot: `(∇T)[m][..] = (∇_m T)[..]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::Jet;
use crate::structure::{ConnectionKind, LocalGeometry};
use crate::tensor::{Scalar, Tensor, Variance};

use Variance::{Lower, Upper};

/// Coordinate covariant derivative of a tensor field given as jets.
///
/// The result has rank `t.rank() + 1` with the derivative index first, and
/// jet order `min(t.order() − 1, conn.order())`.
///
/// # Panics
/// If `t` has jet order 0.
pub fn covariant_derivative(t: &Tensor<Jet>, conn: &Tensor<Jet>) -> Tensor<Jet> {
    let n = t.dim();
    let r = t.rank();
    let partials: Vec<Tensor<Jet>> = (0..n).map(|m| t.derivative(m)).collect();
    let mut variance = vec![Lower];
    variance.extend_from_slice(t.variance());
    let slot_variance = t.variance().to_vec();
    Tensor::from_fn(n, variance, |x| {
        let m = x[0];
        let idx = &x[1..];
        let mut acc = partials[m].get(idx).clone();
        let mut src = idx.to_vec();
        for s in 0..r {
            for q in 0..n {
                src[s] = q;
                match slot_variance[s] {
                    Upper => acc = &acc + &(conn.get(&[idx[s], m, q]) * t.get(&src)),
                    Lower => acc = &acc - &(conn.get(&[q, m, idx[s]]) * t.get(&src)),
                }
            }
            src[s] = idx[s];
        }
        acc
    })
}

/// `R^l_ijk = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik`.
pub fn riemann(conn: &Tensor<Jet>) -> Tensor<Jet> {
    let n = conn.dim();
    let partials: Vec<Tensor<Jet>> = (0..n).map(|m| conn.derivative(m)).collect();
    Tensor::from_fn(n, vec![Upper, Lower, Lower, Lower], |x| {
        let (l, i, j, k) = (x[0], x[1], x[2], x[3]);
        let mut acc = partials[i].get(&[l, j, k]) - partials[j].get(&[l, i, k]);
        for m in 0..n {
            acc = &acc + &(conn.get(&[l, i, m]) * conn.get(&[m, j, k]));
            acc = &acc - &(conn.get(&[l, j, m]) * conn.get(&[m, i, k]));
        }
        acc
    })
}

/// Rebuilds a tensor by reading each component from another index:
/// `result[x] = t[src(x)]`. Slot variances are taken from `t` unchanged.
pub fn reindex<T: Scalar, const R: usize>(t: &Tensor<T>, src: impl Fn([usize; R]) -> [usize; R]) -> Tensor<T> {
    assert_eq!(t.rank(), R);
    Tensor::from_fn(t.dim(), t.variance().to_vec(), |x| {
        let idx: [usize; R] = x.try_into().unwrap();
        t.get(&src(idx)).clone()
    })
}

fn sum<T: Scalar>(zero: &T, terms: impl Iterator<Item = T>) -> T {
    terms.fold(zero.zero_like(), |a, b| a.plus(&b))
}

/// `[K_X, K_Y]` as a (1,3) tensor: `K^l_im K^m_jk − K^l_jm K^m_ik`.
pub fn bracket<T: Scalar>(k: &Tensor<T>) -> Tensor<T> {
    let n = k.dim();
    let z = k.data()[0].clone();
    Tensor::from_fn(n, vec![Upper, Lower, Lower, Lower], |x| {
        let (l, i, j, kk) = (x[0], x[1], x[2], x[3]);
        sum(
            &z,
            (0..n).map(|m| {
                k.get(&[l, i, m])
                    .times(k.get(&[m, j, kk]))
                    .minus(&k.get(&[l, j, m]).times(k.get(&[m, i, kk])))
            }),
        )
    })
}

/// `(∇_i K)^l_jk − (∇_j K)^l_ik` from a derivative laid out `dk[i][l][j][k]`.
pub fn alternate<T: Scalar>(dk: &Tensor<T>) -> Tensor<T> {
    Tensor::from_fn(dk.dim(), vec![Upper, Lower, Lower, Lower], |x| {
        let (l, i, j, k) = (x[0], x[1], x[2], x[3]);
        dk.get(&[i, l, j, k]).minus(dk.get(&[j, l, i, k]))
    })
}

/// `L(X, Y, Z, W) = g(L(X, Y)Z, W)`.
pub fn lower04<T: Scalar>(r: &Tensor<T>, g: &Tensor<T>) -> Tensor<T> {
    let n = r.dim();
    let z = r.data()[0].clone();
    Tensor::from_fn(n, vec![Lower; 4], |x| {
        let (a, b, c, w) = (x[0], x[1], x[2], x[3]);
        sum(&z, (0..n).map(|l| g.get(&[w, l]).times(r.get(&[l, a, b, c]))))
    })
}

/// First-slot trace `Ric_jk = R^l_ljk`.
pub fn ricci<T: Scalar>(r: &Tensor<T>) -> Tensor<T> {
    r.contract(0, 1).expect("curvature has an upper first slot")
}

/// `τ_i = K^m_im`.
pub fn tau<T: Scalar>(k: &Tensor<T>) -> Tensor<T> {
    k.contract(0, 2).expect("K has an upper first slot")
}

/// `(div K)_jk = (∇_i K)^i_jk` from `dk[i][l][j][k]`.
pub fn div_k<T: Scalar>(dk: &Tensor<T>) -> Tensor<T> {
    dk.contract(0, 1).expect("derivative slot is lower, K slot is upper")
}

/// `S = (R₀₄ + R*₀₄)/2`.
pub fn statistical_curvature(r04: &Tensor, r_star04: &Tensor) -> Tensor {
    r04.add(r_star04).scale(0.5)
}

/// `(A ∧ Id)(X, Y)Z = A(Y, Z)X − A(X, Z)Y`, as `[l][i][j][k]`.
pub fn suspension<T: Scalar>(a: &Tensor<T>) -> Tensor<T> {
    let z = a.data()[0].zero_like();
    Tensor::from_fn(a.dim(), vec![Upper, Lower, Lower, Lower], |x| {
        let (l, i, j, k) = (x[0], x[1], x[2], x[3]);
        let mut v = z.clone();
        if l == i {
            v = v.plus(a.get(&[j, k]));
        }
        if l == j {
            v = v.minus(a.get(&[i, k]));
        }
        v
    })
}

/// `P = R − Ric ∧ Id / (n − 1)`.
pub fn projective_curvature<T: Scalar>(r: &Tensor<T>, ric: &Tensor<T>) -> Result<Tensor<T>> {
    let n = r.dim();
    if n < 2 {
        return Err(Error::Dimension(format!("projective curvature needs n >= 2, got {n}")));
    }
    Ok(r.sub(&suspension(ric).scale(1.0 / (n as f64 - 1.0))))
}

/// `Cot_ijk = (∇_i γ)_jk − (∇_j γ)_ik` from `dgamma[i][j][k]`.
pub fn cotton<T: Scalar>(dgamma: &Tensor<T>) -> Tensor<T> {
    Tensor::from_fn(dgamma.dim(), vec![Lower; 3], |x| {
        dgamma.get(&[x[0], x[1], x[2]]).minus(dgamma.get(&[x[1], x[0], x[2]]))
    })
}

/// `(δP)_xyz = (∇_v P)^v_xyz` from `dp[v][l][x][y][z]`.
pub fn delta_p<T: Scalar>(dp: &Tensor<T>) -> Tensor<T> {
    dp.contract(0, 1).expect("derivative slot is lower, P slot is upper")
}

/// `Γ̄^k_ij = Γ^k_ij + ρ_i δ^k_j + ρ_j δ^k_i`.
pub fn projective_transform(conn: &Tensor<Jet>, rho: &Tensor<Jet>) -> Tensor<Jet> {
    Tensor::from_fn(conn.dim(), vec![Upper, Lower, Lower], |x| {
        let (k, i, j) = (x[0], x[1], x[2]);
        let mut v = conn.get(x).clone();
        if k == j {
            v = &v + rho.get(&[i]);
        }
        if k == i {
            v = &v + rho.get(&[j]);
        }
        v
    })
}

/// Curvature through `R̂ + s·alt(∇̂K) + s²[K, K]` with `s` the connection's
/// multiple of `K`; agrees with [`riemann`] on `Γ̂ + sK`.
pub fn riemann_decomposed(geo: &LocalGeometry, kind: ConnectionKind) -> Tensor {
    let s = kind.k_coefficient();
    let r_hat = riemann(&geo.gamma_hat).values();
    let dk_hat = covariant_derivative(&geo.k, &geo.gamma_hat).values();
    let kk = bracket(&geo.k.values());
    r_hat.add(&alternate(&dk_hat).scale(s)).add(&kk.scale(s * s))
}

/// Curvature-level objects at a point, as values.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePack {
    pub point: Vec<f64>,
    pub r: Tensor,
    pub r_star: Tensor,
    pub r_hat: Tensor,
    pub r04: Tensor,
    pub r_star04: Tensor,
    pub r_hat04: Tensor,
    pub ric: Tensor,
    pub ric_star: Tensor,
    pub ric_hat: Tensor,
    pub tau: Tensor,
    pub div_k: Tensor,
    pub s: Tensor,
}

impl CurvaturePack {
    pub fn new(geo: &LocalGeometry) -> Self {
        let g = &geo.metric.g;
        let curv = |kind| riemann(&geo.connection(kind)).values();
        let r = curv(ConnectionKind::Nabla);
        let r_star = curv(ConnectionKind::NablaStar);
        let r_hat = curv(ConnectionKind::LeviCivita);
        let r04 = lower04(&r, g);
        let r_star04 = lower04(&r_star, g);
        let dk_hat = covariant_derivative(&geo.k, &geo.gamma_hat).values();
        Self {
            point: geo.point.coords().to_vec(),
            ric: ricci(&r),
            ric_star: ricci(&r_star),
            ric_hat: ricci(&r_hat),
            r_hat04: lower04(&r_hat, g),
            s: statistical_curvature(&r04, &r_star04),
            tau: geo.tau().values(),
            div_k: div_k(&dk_hat),
            r,
            r_star,
            r_hat,
            r04,
            r_star04,
        }
    }
}

/// Projective objects of one connection at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectivePack {
    /// `γ = Ric/(n − 1)`.
    pub normalized_ricci: Tensor,
    pub p: Tensor,
    pub cot: Tensor,
    pub delta_p: Tensor,
    /// `∇Ric`, laid out `[m][j][k]`.
    pub nabla_ric: Tensor,
}

impl ProjectivePack {
    /// `conn` needs jet order ≥ 2.
    pub fn new(conn: &Tensor<Jet>) -> Result<Self> {
        let n = conn.dim();
        let r = riemann(conn);
        let ric = ricci(&r);
        let p = projective_curvature(&r, &ric)?;
        let gamma = ric.scale(1.0 / (n as f64 - 1.0));
        let nabla_gamma = covariant_derivative(&gamma, conn).values();
        Ok(Self {
            normalized_ricci: gamma.values(),
            cot: cotton(&nabla_gamma),
            delta_p: delta_p(&covariant_derivative(&p, conn).values()),
            nabla_ric: covariant_derivative(&ric, conn).values(),
            p: p.values(),
        })
    }
}

/// The defect of one identity at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityDefect {
    pub name: String,
    pub defect: f64,
    /// Multiplier on the base tolerance (identities involving derivatives of
    /// curvature get a looser tier).
    pub tol_factor: f64,
    /// False when the identity's hypothesis does not hold at this point; the
    /// defect is still reported.
    pub applicable: bool,
}

/// Default α grid for scans and α-identities.
pub const DEFAULT_ALPHAS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

struct Suite {
    out: Vec<IdentityDefect>,
}

impl Suite {
    fn push(&mut self, name: impl Into<String>, a: &Tensor, b: &Tensor) -> Result<()> {
        self.push_with(name, a.rel_defect(b)?, 1.0, true);
        Ok(())
    }

    fn push_with(&mut self, name: impl Into<String>, defect: f64, tol_factor: f64, applicable: bool) {
        self.out.push(IdentityDefect {
            name: name.into(),
            defect,
            tol_factor,
            applicable,
        });
    }

    fn zero(&mut self, name: impl Into<String>, a: &Tensor) -> Result<()> {
        let z = a.scale(0.0);
        self.push(name, a, &z)
    }
}

fn bianchi_second(nabla_r: &Tensor) -> Tensor {
    // (∇_X R)(Y, Z) + (∇_Y R)(Z, X) + (∇_Z R)(X, Y), components [x][l][y][z][w]
    Tensor::from_fn(nabla_r.dim(), nabla_r.variance().to_vec(), |i| {
        let (x, l, y, z, w) = (i[0], i[1], i[2], i[3], i[4]);
        nabla_r.get(&[x, l, y, z, w]) + nabla_r.get(&[y, l, z, x, w]) + nabla_r.get(&[z, l, x, y, w])
    })
}

fn bianchi_first(r: &Tensor) -> Tensor {
    Tensor::from_fn(r.dim(), r.variance().to_vec(), |i| {
        let (l, x, y, z) = (i[0], i[1], i[2], i[3]);
        r.get(&[l, x, y, z]) + r.get(&[l, y, z, x]) + r.get(&[l, z, x, y])
    })
}

/// Riemannian symmetries of a (0,4) form, in order: cyclic sum in the first
/// three slots, first-pair antisymmetry, last-pair antisymmetry, pair exchange.
fn riemannian_symmetries(t: &Tensor) -> [(Tensor, Tensor); 4] {
    let cyclic = Tensor::from_fn(t.dim(), vec![Lower; 4], |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        t.get(&[x, y, z, w]) + t.get(&[y, z, x, w]) + t.get(&[z, x, y, w])
    });
    [
        (cyclic.scale(0.0), cyclic),
        (t.clone(), reindex(t, |[x, y, z, w]| [y, x, z, w]).scale(-1.0)),
        (t.clone(), reindex(t, |[x, y, z, w]| [x, y, w, z]).scale(-1.0)),
        (t.clone(), reindex(t, |[x, y, z, w]| [z, w, x, y])),
    ]
}

/// Evaluates the identity catalogue at one point.
///
/// `alphas` selects the α-connections tested; `tol` only decides whether the
/// conditional α-identity `R^α = R + (α² − 1)[K, K]` is applicable (it needs
/// `alt(∇̂K) = 0`).
pub fn identity_suite(geo: &LocalGeometry, alphas: &[f64], tol: f64) -> Result<Vec<IdentityDefect>> {
    let n = geo.dim();
    let g = &geo.metric.g;
    let mut s = Suite { out: Vec::new() };

    let hat = geo.connection(ConnectionKind::LeviCivita);
    let primal = geo.connection(ConnectionKind::Nabla);
    let dual = geo.connection(ConnectionKind::NablaStar);

    let r_hat_j = riemann(&hat);
    let r_j = riemann(&primal);
    let r_star_j = riemann(&dual);
    let (r_hat, r, r_star) = (r_hat_j.values(), r_j.values(), r_star_j.values());

    let k = geo.k.values();
    let kk = bracket(&k);
    let dk_hat = covariant_derivative(&geo.k, &hat).values();
    let dk = covariant_derivative(&geo.k, &primal).values();
    let alt_hat = alternate(&dk_hat);
    let alt = alternate(&dk);
    let dc_hat = covariant_derivative(&geo.cubic, &hat).values();

    // Antisymmetry, Bianchi identities.
    for (label, t) in [("R", &r), ("Rstar", &r_star), ("Rhat", &r_hat)] {
        s.push(
            format!("antisymmetry[{label}]"),
            t,
            &reindex(t, |[l, i, j, k]| [l, j, i, k]).scale(-1.0),
        )?;
        s.zero(format!("bianchi_first[{label}]"), &bianchi_first(t))?;
    }
    for (label, rj, conn) in [
        ("R", &r_j, &primal),
        ("Rstar", &r_star_j, &dual),
        ("Rhat", &r_hat_j, &hat),
    ] {
        let b2 = bianchi_second(&covariant_derivative(rj, conn).values());
        let z = b2.scale(0.0);
        s.push_with(format!("bianchi_second[{label}]"), b2.rel_defect(&z)?, 10.0, true);
    }

    // Duality pairing g(R(X,Y)Z, W) = −g(Z, R*(X,Y)W).
    let r04 = lower04(&r, g);
    let r_star04 = lower04(&r_star, g);
    let r_hat04 = lower04(&r_hat, g);
    s.push(
        "duality_pairing",
        &r04,
        &reindex(&r_star04, |[x, y, z, w]| [x, y, w, z]).scale(-1.0),
    )?;

    // Curvature decompositions.
    s.push("decomposition[R,levi_civita]", &r, &r_hat.add(&alt_hat).add(&kk))?;
    s.push("decomposition[R,nabla]", &r, &r_hat.add(&alt).sub(&kk))?;
    s.push(
        "decomposition[Rstar,levi_civita]",
        &r_star,
        &r_hat.sub(&alt_hat).add(&kk),
    )?;
    s.push(
        "decomposition[Rstar,nabla]",
        &r_star,
        &r_hat.sub(&alt).add(&kk.scale(3.0)),
    )?;
    s.push("decomposition[half_difference]", &r.sub(&r_star).scale(0.5), &alt_hat)?;

    // (0,4) decompositions.
    let kk04 = lower04(&kk, g);
    let dc_x = dc_hat.clone();
    let dc_y = reindex(&dc_hat, |[x, y, z, w]| [y, x, z, w]);
    let c_alt = dc_y.sub(&dc_x); // (∇̂_Y C)(X,Z,W) − (∇̂_X C)(Y,Z,W)
    s.push("decomposition04[R]", &r04, &r_hat04.add(&c_alt.scale(0.5)).add(&kk04))?;
    s.push(
        "decomposition04[Rstar]",
        &r_star04,
        &r_hat04.sub(&c_alt.scale(0.5)).add(&kk04),
    )?;
    s.push("decomposition04[difference]", &r04.sub(&r_star04), &c_alt)?;
    s.push(
        "decomposition04[mean]",
        &r04.add(&r_star04).scale(0.5),
        &r_hat04.add(&kk04),
    )?;

    // Pair identities of R and R*.
    for (label, t, sign) in [("R", &r04, 1.0), ("Rstar", &r_star04, -1.0)] {
        let [cyc, anti, _, _] = riemannian_symmetries(t);
        s.push(format!("cyclic04[{label}]"), &cyc.0, &cyc.1)?;
        s.push(format!("first_pair_antisymmetry04[{label}]"), &anti.0, &anti.1)?;
        let swapped = reindex(t, |[x, y, z, w]| [x, y, w, z]);
        s.push(format!("last_pair_sum[{label}]"), &t.add(&swapped), &c_alt.scale(sign))?;
        let lhs = t.add(&reindex(t, |[x, y, z, w]| [y, x, w, z]));
        let rhs = reindex(t, |[x, y, z, w]| [z, w, x, y]).add(&reindex(t, |[x, y, z, w]| [w, z, y, x]));
        s.push(format!("pair_exchange_sum[{label}]"), &lhs, &rhs)?;
    }
    s.push(
        "last_pair_duality",
        &r04.add(&reindex(&r_star04, |[x, y, z, w]| [x, y, w, z])),
        &r04.scale(0.0),
    )?;

    // Riemannian symmetries of R̂ and S.
    let stat = statistical_curvature(&r04, &r_star04);
    for (label, t) in [("Rhat", &r_hat04), ("S", &stat)] {
        let names = ["cyclic", "first_pair", "last_pair", "pair_exchange"];
        for (name, (a, b)) in names.iter().zip(riemannian_symmetries(t)) {
            s.push(format!("riemannian_symmetry[{label},{name}]"), &a, &b)?;
        }
    }

    // ∇̂C = −2 g(∇̂K ·, ·)
    let dk_lowered = Tensor::from_fn(n, vec![Lower; 4], |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        -2.0 * (0..n).map(|l| g.get(&[w, l]) * dk_hat.get(&[x, l, y, z])).sum::<f64>()
    });
    s.push("cubic_derivative_vs_k", &dc_hat, &dk_lowered)?;

    // Ricci decompositions.
    let ric = ricci(&r);
    let ric_star = ricci(&r_star);
    let ric_hat = ricci(&r_hat);
    let tau_j = geo.tau();
    let tau_v = tau_j.values();
    let div_hat = div_k(&dk_hat);
    let div = div_k(&dk);
    let dtau_hat = covariant_derivative(&tau_j, &hat).values();
    let dtau = covariant_derivative(&tau_j, &primal).values();
    let tau_k = Tensor::from_fn(n, vec![Lower, Lower], |x| {
        (0..n).map(|m| tau_v.get(&[m]) * k.get(&[m, x[0], x[1]])).sum()
    });
    let k_k = Tensor::from_fn(n, vec![Lower, Lower], |x| {
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                acc += k.get(&[a, x[0], b]) * k.get(&[b, x[1], a]);
            }
        }
        acc
    });
    let quad = tau_k.sub(&k_k);
    s.push(
        "ricci[Ric,levi_civita]",
        &ric,
        &ric_hat.add(&div_hat).sub(&dtau_hat).add(&quad),
    )?;
    s.push("ricci[Ric,nabla]", &ric, &ric_hat.add(&div).sub(&dtau).sub(&quad))?;
    s.push(
        "ricci[Ricstar,levi_civita]",
        &ric_star,
        &ric_hat.sub(&div_hat).add(&dtau_hat).add(&quad),
    )?;
    s.push(
        "ricci[Ricstar,nabla]",
        &ric_star,
        &ric_hat.sub(&div).add(&dtau).add(&quad.scale(3.0)),
    )?;
    let half_diff = ric.sub(&ric_star).scale(0.5);
    s.push(
        "ricci[half_difference,levi_civita]",
        &half_diff,
        &div_hat.sub(&dtau_hat),
    )?;
    s.push(
        "ricci[half_difference,nabla]",
        &half_diff,
        &div.sub(&dtau).sub(&quad.scale(2.0)),
    )?;
    s.push("ricci[mean]", &ric.add(&ric_star).scale(0.5), &ric_hat.add(&quad))?;

    // Ric(Y,Z) − Ric(Z,Y) = −dτ(Y,Z)
    let d_tau = Tensor::from_fn(n, vec![Lower, Lower], |x| {
        tau_j.get(&[x[1]]).d1(x[0]) - tau_j.get(&[x[0]]).d1(x[1])
    });
    s.push(
        "ricci_antisymmetric_part",
        &ric.sub(&reindex(&ric, |[a, b]| [b, a])),
        &d_tau.scale(-1.0),
    )?;

    // α-connections.
    let conj = alt_hat.rel_defect(&alt_hat.scale(0.0))? <= tol;
    for &a in alphas {
        let kind = ConnectionKind::Alpha(a);
        let r_alpha = riemann(&geo.connection(kind)).values();
        s.push(
            format!("alpha_decomposition[{a}]"),
            &r_alpha,
            &riemann_decomposed(geo, kind),
        )?;
        let shifted = r.add(&kk.scale(a * a - 1.0));
        s.push_with(
            format!("alpha_bracket_shift[{a}]"),
            r_alpha.rel_defect(&shifted)?,
            1.0,
            conj,
        );
    }

    // Projective invariants.
    for (label, conn) in [("nabla", &primal), ("nabla_star", &dual), ("levi_civita", &hat)] {
        let pp = ProjectivePack::new(conn)?;
        if n == 2 {
            s.zero(format!("projective_curvature_2d[{label}]"), &pp.p)?;
        } else {
            let rel = pp.delta_p.rel_defect(&pp.cot.scale(n as f64 - 2.0))?;
            s.push_with(format!("delta_p_cotton[{label}]"), rel, 10.0, true);
        }
    }
    Ok(s.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{Point, ScalarField};
    use crate::models::expr::parse_expression;
    use crate::structure::{complete_cubic, Chart};

    fn coords(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i}")).collect()
    }

    fn expr(src: &str, n: usize) -> ScalarField {
        ScalarField::expression(parse_expression(src, &coords(n)).unwrap())
    }

    fn chart(metric: &[&str], cubic: Vec<([usize; 3], &str)>) -> Chart {
        let n = (metric.len() as f64).sqrt() as usize;
        let m = metric.iter().map(|s| expr(s, n)).collect();
        let c = complete_cubic(n, cubic.into_iter().map(|(i, s)| (i, expr(s, n))).collect()).unwrap();
        Chart::new("t", coords(n), m, c).unwrap()
    }

    fn sphere() -> Chart {
        chart(&["1", "0", "0", "sin(x1)^2"], vec![])
    }

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sphere_ricci_is_metric() {
        let geo = sphere().local(&pt(&[1.1, 0.4])).unwrap();
        let pack = CurvaturePack::new(&geo);
        assert!(pack.ric.max_diff(&geo.metric.g).unwrap() < 1e-13);
        // R_1212 = g(R(∂1,∂2)∂1,∂2) = −sin²θ for k = 1 with this slot order
        let want = -(1.1f64.sin().powi(2));
        assert!((pack.r_hat04.get(&[0, 1, 0, 1]) - want).abs() < 1e-13);
    }

    #[test]
    fn euclidean_curvature_is_zero() {
        let geo = chart(&["1", "0", "0", "0", "1", "0", "0", "0", "1"], vec![])
            .local(&pt(&[0.2, 0.1, -0.3]))
            .unwrap();
        let pack = CurvaturePack::new(&geo);
        assert_eq!(pack.r.max_norm(), 0.0);
        assert_eq!(pack.ric.max_norm(), 0.0);
    }

    #[test]
    fn flat_with_cubic_is_pure_bracket() {
        let c = chart(&["1", "0", "0", "1"], vec![([0, 0, 0], "2")]);
        let geo = c.local(&pt(&[0.5, 0.5])).unwrap();
        let pack = CurvaturePack::new(&geo);
        let kk = bracket(&geo.k.values());
        assert!(pack.r.max_diff(&kk).unwrap() < 1e-15);
        assert!(pack.r.max_diff(&pack.r_star).unwrap() < 1e-15);
        // K has a single entry, so [K, K] vanishes and τ_1 = −1
        assert_eq!(pack.r.max_norm(), 0.0);
        assert_eq!(pack.tau.data(), &[-1.0, 0.0]);
        assert_eq!(pack.div_k.max_norm(), 0.0);
    }

    #[test]
    fn covariant_derivative_of_metric_vanishes_for_levi_civita() {
        let c = chart(&["exp(x2)", "0.2*x1", "0.2*x1", "1+x1^2"], vec![]);
        let geo = c.local(&pt(&[0.3, 0.6])).unwrap();
        let dg = covariant_derivative(&geo.g, &geo.gamma_hat);
        assert!(dg.values().max_norm() < 1e-14);
        assert_eq!(dg.order(), 2);
    }

    #[test]
    fn suspension_of_metric_is_constant_curvature_model() {
        let g = Tensor::from_data(2, vec![Lower, Lower], vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let s = suspension(&g);
        // (g ∧ Id)(X, Y)Z = g(Y, Z)X − g(X, Z)Y
        assert_eq!(*s.get(&[0, 0, 1, 1]), 1.0);
        assert_eq!(*s.get(&[1, 0, 1, 1]), -0.5);
        assert_eq!(*s.get(&[1, 1, 0, 0]), 2.0);
    }

    #[test]
    fn projective_curvature_vanishes_on_sphere() {
        let geo = sphere().local(&pt(&[0.9, 2.0])).unwrap();
        let pp = ProjectivePack::new(&geo.gamma_hat).unwrap();
        assert!(pp.p.max_norm() < 1e-13);
    }

    fn curved3() -> Chart {
        chart(
            &["1", "0", "0", "0", "exp(2*x1)", "0", "0", "0", "1+x1^2"],
            vec![
                ([0, 0, 0], "sin(x2)"),
                ([0, 1, 2], "x1*x3"),
                ([1, 1, 2], "0.5+x2^2"),
                ([2, 2, 2], "cos(x1+x3)"),
            ],
        )
    }

    fn curved2() -> Chart {
        chart(
            &["exp(x2)", "0.3*sin(x1)", "0.3*sin(x1)", "2+x1^2"],
            vec![([0, 0, 0], "x2"), ([0, 0, 1], "x1*x2"), ([1, 1, 1], "1+sin(x1)")],
        )
    }

    #[test]
    fn identity_suite_holds_on_generic_charts() {
        for (c, p) in [(curved2(), pt(&[0.3, -0.2])), (curved3(), pt(&[0.2, 0.4, -0.3]))] {
            let suite = identity_suite(&c.local(&p).unwrap(), &DEFAULT_ALPHAS, 1e-9).unwrap();
            for d in &suite {
                if d.applicable {
                    assert!(d.defect < 1e-11, "{}: {:e}", d.name, d.defect);
                }
            }
            // generic cubic forms break conjugate symmetry, so the shifted
            // α-identity is out of scope and visibly fails
            let shift = suite.iter().find(|d| d.name == "alpha_bracket_shift[0.5]").unwrap();
            assert!(!shift.applicable && shift.defect > 1e-6);
        }
    }

    #[test]
    fn half_difference_nabla_form_needs_quadratic_terms() {
        // Without the τ(K_Y Z) and g(K_Y, K_Z) terms the ∇-form of
        // ½(Ric − Ric*) fails on a generic chart.
        let geo = curved2().local(&pt(&[0.3, -0.2])).unwrap();
        let primal = geo.connection(ConnectionKind::Nabla);
        let pack = CurvaturePack::new(&geo);
        let dk = covariant_derivative(&geo.k, &primal).values();
        let dtau = covariant_derivative(&geo.tau(), &primal).values();
        let plain = div_k(&dk).sub(&dtau);
        let half = pack.ric.sub(&pack.ric_star).scale(0.5);
        assert!(half.rel_defect(&plain).unwrap() > 1e-3);
    }

    /// Diagonal 3D metric with a cubic form whose τ depends on x1 only, so
    /// dτ = 0 and the primal Ricci tensor is symmetric.
    fn equiaffine3() -> Chart {
        chart(
            &["1", "0", "0", "0", "exp(2*x1)", "0", "0", "0", "1+x1^2"],
            vec![([0, 0, 0], "sin(x1)"), ([0, 1, 1], "1+x1^2"), ([0, 2, 2], "x1")],
        )
    }

    fn rho_from(src: &str, p: &Point) -> Tensor<Jet> {
        let phi = expr(src, 3).eval_jet(p, 3).unwrap();
        Tensor::from_fn(3, vec![Lower], |i| phi.derivative(i[0]))
    }

    /// Defects of the three transformation laws for `Γ → Γ + ρ⊗δ + δ⊗ρ`.
    fn law_defects(conn: &Tensor<Jet>, rho: &Tensor<Jet>) -> [f64; 3] {
        let bar = projective_transform(conn, rho);
        let before = ProjectivePack::new(conn).unwrap();
        let after = ProjectivePack::new(&bar).unwrap();
        let drho = covariant_derivative(rho, conn).values();
        let rv = rho.values();
        let gamma_law = before.normalized_ricci.sub(&drho).add(&rv.outer(&rv));
        let rho_p = Tensor::from_fn(3, vec![Lower; 3], |x| {
            (0..3)
                .map(|l| rv.get(&[l]) * before.p.get(&[l, x[0], x[1], x[2]]))
                .sum()
        });
        [
            after.p.rel_defect(&before.p).unwrap(),
            after.normalized_ricci.rel_defect(&gamma_law).unwrap(),
            after.cot.sub(&before.cot).rel_defect(&rho_p).unwrap(),
        ]
    }

    #[test]
    fn projective_transformation_laws() {
        let p = pt(&[0.2, 0.4, -0.3]);
        let geo = equiaffine3().local(&p).unwrap();
        let rho = rho_from("sin(x1)+x2", &p);
        for kind in [
            ConnectionKind::Nabla,
            ConnectionKind::NablaStar,
            ConnectionKind::LeviCivita,
        ] {
            let conn = geo.connection(kind);
            let ric = ricci(&riemann(&conn)).values();
            assert!(ric.symmetry_defect(&[0, 1]).unwrap() < 1e-13);
            for d in law_defects(&conn, &rho) {
                assert!(d < 1e-12, "{kind}: {d:e}");
            }
        }
    }

    #[test]
    fn cotton_law_needs_symmetric_ricci() {
        let p = pt(&[0.2, 0.4, -0.3]);
        let geo = curved3().local(&p).unwrap();
        let conn = geo.connection(ConnectionKind::Nabla);
        assert!(ricci(&riemann(&conn)).values().symmetry_defect(&[0, 1]).unwrap() > 1e-2);
        let [p_law, gamma_law, cot_law] = law_defects(&conn, &rho_from("sin(x1)+x2", &p));
        assert!(p_law < 1e-12 && gamma_law < 1e-12);
        assert!(cot_law > 1e-2);
    }
}
