//! Upper-half-plane primitives: points, distances, Möbius maps, geodesics,
//! common perpendiculars and right-angled hexagons.
//!
//! Everything here works in the upper half-plane model. Geodesics are given
//! by their two ideal endpoints on the real axis (or the point at infinity).

use crate::error::{Error, Result};

/// Default relative tolerance for geometric comparisons.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// A point of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HPoint {
    pub re: f64,
    pub im: f64,
}

impl HPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(im > 0.0) || !re.is_finite() || !im.is_finite() {
            return Err(Error::InvalidPoint { re, im });
        }
        Ok(Self { re, im })
    }

    /// `i`, the base point of all frames.
    pub const I: HPoint = HPoint { re: 0.0, im: 1.0 };

    fn unchecked(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    fn validate(&self) -> Result<()> {
        if !(self.im > 0.0) || !self.re.is_finite() || !self.im.is_finite() {
            return Err(Error::InvalidPoint {
                re: self.re,
                im: self.im,
            });
        }
        Ok(())
    }
}

/// Hyperbolic distance in the upper half-plane.
///
/// Uses `d = 2 asinh(|z - w| / (2 sqrt(Im z Im w)))`, which is the closed form
/// of `cosh d = 1 + |z - w|^2 / (2 Im z Im w)` without the cancellation near
/// the diagonal.
pub fn dist_h(z: HPoint, w: HPoint) -> Result<f64> {
    z.validate()?;
    w.validate()?;
    let dx = z.re - w.re;
    let dy = z.im - w.im;
    let chord = dx.hypot(dy);
    Ok(2.0 * (chord / (2.0 * (z.im * w.im).sqrt())).asinh())
}

/// An element of `SL(2, R)` acting by `z -> (az + b) / (cz + d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mobius {
    pub const IDENTITY: Mobius = Mobius {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// Builds a map from an arbitrary real matrix with positive determinant,
    /// rescaled to determinant one.
    pub fn normalized(a: f64, b: f64, c: f64, d: f64) -> Option<Self> {
        let det = a * d - b * c;
        if !(det > 0.0) || !det.is_finite() {
            return None;
        }
        let s = det.sqrt().recip();
        Some(Self {
            a: a * s,
            b: b * s,
            c: c * s,
            d: d * s,
        })
    }

    /// Hyperbolic translation along the imaginary axis by `len`; moves `i` to
    /// `e^len i`.
    pub fn translation(len: f64) -> Self {
        let h = (0.5 * len).exp();
        Self {
            a: h,
            b: 0.0,
            c: 0.0,
            d: h.recip(),
        }
    }

    /// Rotation about `i` by `angle` (counter-clockwise).
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self {
            a: c,
            b: s,
            c: -s,
            d: c,
        }
    }

    pub fn compose(&self, other: &Mobius) -> Mobius {
        Mobius {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn inverse(&self) -> Mobius {
        Mobius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn apply(&self, z: HPoint) -> HPoint {
        // (az + b)/(cz + d) with z = x + iy
        let nr = self.a * z.re + self.b;
        let ni = self.a * z.im;
        let dr = self.c * z.re + self.d;
        let di = self.c * z.im;
        let den = dr * dr + di * di;
        HPoint::unchecked((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }

    /// Action on the boundary `R ∪ {∞}`.
    pub fn apply_ideal(&self, x: Ideal) -> Ideal {
        match x {
            Ideal::Infinity => {
                if self.c == 0.0 {
                    Ideal::Infinity
                } else {
                    Ideal::Finite(self.a / self.c)
                }
            }
            Ideal::Finite(x) => {
                let den = self.c * x + self.d;
                if den == 0.0 {
                    Ideal::Infinity
                } else {
                    Ideal::Finite((self.a * x + self.b) / den)
                }
            }
        }
    }
}

/// A point of the ideal boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ideal {
    Finite(f64),
    Infinity,
}

/// An oriented geodesic, from `start` to `end` on the ideal boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geodesic {
    pub start: Ideal,
    pub end: Ideal,
}

impl Geodesic {
    pub fn new(start: Ideal, end: Ideal) -> Self {
        Self { start, end }
    }

    /// The imaginary axis oriented upwards.
    pub const IMAGINARY_AXIS: Geodesic = Geodesic {
        start: Ideal::Finite(0.0),
        end: Ideal::Infinity,
    };

    pub fn transformed(&self, m: &Mobius) -> Geodesic {
        Geodesic {
            start: m.apply_ideal(self.start),
            end: m.apply_ideal(self.end),
        }
    }

    /// A Möbius map sending this geodesic onto the imaginary axis with
    /// `start -> 0` and `end -> ∞`.
    pub fn normalizer(&self) -> Option<Mobius> {
        match (self.start, self.end) {
            (Ideal::Finite(u), Ideal::Infinity) => Some(Mobius {
                a: 1.0,
                b: -u,
                c: 0.0,
                d: 1.0,
            }),
            (Ideal::Infinity, Ideal::Finite(v)) => Some(Mobius {
                a: 0.0,
                b: -1.0,
                c: 1.0,
                d: -v,
            }),
            (Ideal::Finite(u), Ideal::Finite(v)) => {
                if u == v {
                    return None;
                }
                // z -> s (z - u)/(z - v), with the sign s chosen to keep det > 0
                if u > v {
                    Mobius::normalized(1.0, -u, 1.0, -v)
                } else {
                    Mobius::normalized(-1.0, u, 1.0, -v)
                }
            }
            (Ideal::Infinity, Ideal::Infinity) => None,
        }
    }
}

/// A frame: a point with a unit tangent direction, stored as the isometry
/// taking the standard frame (at `i`, pointing up the imaginary axis) to it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame(pub Mobius);

impl Frame {
    pub const STANDARD: Frame = Frame(Mobius::IDENTITY);

    pub fn point(&self) -> HPoint {
        self.0.apply(HPoint::I)
    }

    /// Move forward along the current geodesic by `len`.
    pub fn advance(&self, len: f64) -> Frame {
        Frame(self.0.compose(&Mobius::translation(len)))
    }

    /// Turn left by `angle`.
    pub fn turn(&self, angle: f64) -> Frame {
        Frame(self.0.compose(&Mobius::rotation(angle)))
    }

    /// The full geodesic through the frame, oriented along its direction.
    pub fn geodesic(&self) -> Geodesic {
        Geodesic::IMAGINARY_AXIS.transformed(&self.0)
    }

    /// Point at Fermi coordinates `(rho, t)` relative to this frame: go `t`
    /// along the frame's geodesic, then `rho` perpendicular to the left.
    pub fn fermi_point(&self, rho: f64, t: f64) -> HPoint {
        let e = t.exp();
        let p = HPoint::unchecked(-e * rho.tanh(), e / rho.cosh());
        self.0.apply(p)
    }

    /// Inverse of [`Frame::fermi_point`]: `(rho, t)` of `z`, with `rho > 0` on
    /// the left of the frame's direction.
    pub fn fermi_coords(&self, z: HPoint) -> (f64, f64) {
        let w = self.0.inverse().apply(z);
        let rho = (-w.re / w.im).asinh();
        let t = 0.5 * (w.re * w.re + w.im * w.im).ln();
        (rho, t)
    }
}

/// Foot points of the common perpendicular of two ultraparallel geodesics and
/// its length. The first foot lies on `g1`.
pub fn common_perpendicular_foot(g1: &Geodesic, g2: &Geodesic) -> Result<(HPoint, HPoint, f64)> {
    let norm = g1.normalizer().ok_or(Error::NoPerpendicular)?;
    let g2n = g2.transformed(&norm);
    let (p, q) = match (g2n.start, g2n.end) {
        (Ideal::Finite(p), Ideal::Finite(q)) => (p, q),
        _ => return Err(Error::NoPerpendicular),
    };
    if p == 0.0 || q == 0.0 || p == q || p * q < 0.0 {
        return Err(Error::NoPerpendicular);
    }
    // Both endpoints on one side of the imaginary axis; move to the positive
    // side with z -> -1/z if needed (it maps the axis to itself).
    let flip = p < 0.0;
    let (p, q) = if flip { (-1.0 / p, -1.0 / q) } else { (p, q) };
    let (p, q) = if p < q { (p, q) } else { (q, p) };
    // The perpendicular is the circle |z| = sqrt(pq).
    let r = (p * q).sqrt();
    let c = 0.5 * (p + q);
    let x = p * q / c;
    let y = r * (q - p) / (p + q);
    let foot1 = HPoint::unchecked(0.0, r);
    let foot2 = HPoint::unchecked(x, y);
    let len = (2.0 * r / (q - p)).asinh();
    let back = if flip {
        norm.inverse().compose(&Mobius {
            a: 0.0,
            b: -1.0,
            c: 1.0,
            d: 0.0,
        })
    } else {
        norm.inverse()
    };
    Ok((back.apply(foot1), back.apply(foot2), len))
}

/// A right-angled hexagon given by its alternate sides `a` and the opposite
/// sides `b` (`b[k]` is opposite `a[k]`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hexagon {
    pub alt_sides: [f64; 3],
    pub seam_sides: [f64; 3],
}

/// The right-angled hexagon law: the side opposite `a_k` from the three
/// alternate sides.
pub fn hexagon_seams(a1: f64, a2: f64, a3: f64) -> Result<Hexagon> {
    let a = [a1, a2, a3];
    for &x in &a {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::InvalidLength(x));
        }
    }
    let mut b = [0.0; 3];
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        b[k] = opposite_side(a[i], a[j], a[k])?;
    }
    Ok(Hexagon {
        alt_sides: a,
        seam_sides: b,
    })
}

/// `acosh((cosh x cosh y + cosh z) / (sinh x sinh y))`, computed so that
/// moderately large inputs do not overflow and small results keep precision.
fn opposite_side(x: f64, y: f64, z: f64) -> Result<f64> {
    // cosh x cosh y = cosh(x - y) + sinh x sinh y, so
    // cosh b - 1 = (cosh(x - y) + cosh z) / (sinh x sinh y)
    let num = (x - y).cosh() + z.cosh();
    let den = x.sinh() * y.sinh();
    if !num.is_finite() || !den.is_finite() {
        return Err(Error::Range("hexagon side overflow"));
    }
    let e = num / den;
    if !e.is_finite() {
        return Err(Error::Range("hexagon side overflow"));
    }
    if !(e > 0.0) {
        return Err(Error::Range("hexagon side underflow"));
    }
    Ok((e + (e * (e + 2.0)).sqrt()).ln_1p())
}

impl Hexagon {
    /// Re-derive the alternate sides from the seams; the hexagon law is
    /// symmetric under exchanging the two families.
    pub fn alternate_from_seams(&self) -> Result<[f64; 3]> {
        let b = self.seam_sides;
        let mut a = [0.0; 3];
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            a[k] = opposite_side(b[i], b[j], b[k])?;
        }
        Ok(a)
    }

    /// Seam between alternate sides `k` and `k + 1` (cyclically), which is
    /// opposite side `k + 2`.
    pub fn seam_between(&self, k: usize) -> f64 {
        self.seam_sides[(k + 2) % 3]
    }

    /// Lay the hexagon out in the upper half-plane. The walk starts at `i`
    /// heading up, traverses `a_0`, seam(0,1), `a_1`, seam(1,2), `a_2`,
    /// seam(2,0), turning left by a right angle at every vertex.
    pub fn chart(&self) -> HexagonChart {
        let quarter = std::f64::consts::FRAC_PI_2;
        let mut frame = Frame::STANDARD;
        let mut alt_frames = [Frame::STANDARD; 3];
        let mut seam_frames = [Frame::STANDARD; 3];
        for k in 0..3 {
            alt_frames[k] = frame;
            frame = frame.advance(self.alt_sides[k]).turn(quarter);
            seam_frames[k] = frame;
            frame = frame.advance(self.seam_between(k)).turn(quarter);
        }
        HexagonChart {
            hexagon: *self,
            alt_frames,
            seam_frames,
            closure: frame,
        }
    }
}

/// A hexagon placed in the upper half-plane, with the frames at the start of
/// each side. The interior lies to the left of every side.
#[derive(Clone, Copy, Debug)]
pub struct HexagonChart {
    pub hexagon: Hexagon,
    /// Frame at the start of alternate side `k`, pointing along it.
    pub alt_frames: [Frame; 3],
    /// Frame at the start of the seam from side `k` to side `k + 1`.
    pub seam_frames: [Frame; 3],
    /// Frame after walking all six sides; equals the standard frame up to
    /// rounding when the hexagon closes.
    pub closure: Frame,
}

impl HexagonChart {
    /// Deviation of the closing frame from the start, in hyperbolic distance
    /// of the base point plus the direction defect.
    pub fn closure_defect(&self) -> f64 {
        let p = self.closure.point();
        let d = dist_h(p, HPoint::I).unwrap_or(f64::INFINITY);
        let ahead = self.closure.advance(1.0).point();
        let e = dist_h(ahead, HPoint::new(0.0, 1f64.exp()).unwrap()).unwrap_or(f64::INFINITY);
        d + e
    }

    /// Midpoint of the seam between sides `k` and `k + 1`.
    pub fn seam_midpoint(&self, k: usize) -> Frame {
        self.seam_frames[k].advance(0.5 * self.hexagon.seam_between(k))
    }

    /// Frame at the seam midpoint pointing into the hexagon along the
    /// perpendicular bisector of the two adjacent alternate sides.
    pub fn bisector_frame(&self, k: usize) -> Frame {
        self.seam_midpoint(k).turn(std::f64::consts::FRAC_PI_2)
    }

    /// The point equidistant from the three alternate sides.
    pub fn incenter(&self) -> Result<HPoint> {
        let f0 = self.bisector_frame(0);
        let f1 = self.bisector_frame(1);
        let g1 = f1.geodesic().transformed(&f0.0.inverse());
        let (p, q) = match (g1.start, g1.end) {
            (Ideal::Finite(p), Ideal::Finite(q)) => (p, q),
            _ => return Err(Error::NoPerpendicular),
        };
        if p * q >= 0.0 {
            return Err(Error::NoPerpendicular);
        }
        // the semicircle over [p, q] meets the imaginary axis at height sqrt(-pq)
        let y = (-p * q).sqrt();
        Ok(f0.0.apply(HPoint::unchecked(0.0, y)))
    }

    /// Distance from the geodesic carrying alternate side `k` to the geodesic
    /// carrying the opposite seam.
    pub fn altitude(&self, k: usize) -> Result<f64> {
        let side = self.alt_frames[k].geodesic();
        let opposite = self.seam_frames[(k + 1) % 3].geodesic();
        common_perpendicular_foot(&side, &opposite).map(|(_, _, d)| d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(re: f64, im: f64) -> HPoint {
        HPoint::new(re, im).unwrap()
    }

    #[test]
    fn distance_along_imaginary_axis() {
        let d = dist_h(HPoint::I, pt(0.0, 1f64.exp())).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        assert_eq!(dist_h(pt(0.3, 2.0), pt(0.3, 2.0)).unwrap(), 0.0);
    }

    #[test]
    fn invalid_point_rejected() {
        assert!(HPoint::new(0.0, 0.0).is_err());
        assert!(dist_h(HPoint { re: 0.0, im: -1.0 }, HPoint::I).is_err());
    }

    #[test]
    fn collar_translation_distance() {
        // x at distance 0.7 from the imaginary axis, translated by e^1
        let rho = 0.7f64;
        let ell = 1.0f64;
        let x = Frame::STANDARD.fermi_point(rho, 0.3);
        let y = HPoint::new(x.re * ell.exp(), x.im * ell.exp()).unwrap();
        let lhs = dist_h(x, y).unwrap();
        let rhs = (1.0 + (ell.cosh() - 1.0) * rho.cosh().powi(2)).acosh();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn fermi_roundtrip() {
        let f = Frame::STANDARD.advance(0.4).turn(0.9).advance(-1.3);
        let z = f.fermi_point(-0.8, 2.1);
        let (rho, t) = f.fermi_coords(z);
        assert!((rho + 0.8).abs() < 1e-12 && (t - 2.1).abs() < 1e-12);
        let d = dist_h(z, f.fermi_point(0.0, 2.1)).unwrap();
        assert!((d - 0.8).abs() < 1e-12);
    }

    #[test]
    fn concentric_semicircles() {
        let r = 3.5;
        let g1 = Geodesic::new(Ideal::Finite(-1.0), Ideal::Finite(1.0));
        let g2 = Geodesic::new(Ideal::Finite(-r), Ideal::Finite(r));
        let (f1, f2, len) = common_perpendicular_foot(&g1, &g2).unwrap();
        assert!((len - r.ln()).abs() < 1e-12);
        assert!(f1.re.abs() < 1e-12 && (f1.im - 1.0).abs() < 1e-12);
        assert!(f2.re.abs() < 1e-12 && (f2.im - r).abs() < 1e-12);
    }

    #[test]
    fn intersecting_geodesics_have_no_perpendicular() {
        let g1 = Geodesic::new(Ideal::Finite(-1.0), Ideal::Finite(1.0));
        let g2 = Geodesic::new(Ideal::Finite(0.0), Ideal::Finite(2.0));
        assert!(matches!(
            common_perpendicular_foot(&g1, &g2),
            Err(Error::NoPerpendicular)
        ));
        let g3 = Geodesic::new(Ideal::Finite(1.0), Ideal::Finite(2.0));
        assert!(common_perpendicular_foot(&g1, &g3).is_err());
    }

    /// Cross-ratio oracle: for endpoints normalized to (0, ∞, p, q) the cross
    /// ratio is p/q and sinh d = 2 sqrt(p/q) / (1 - p/q).
    fn cross_ratio_distance(g1: &Geodesic, g2: &Geodesic) -> f64 {
        let f = |x: Ideal| match x {
            Ideal::Finite(v) => v,
            Ideal::Infinity => panic!("finite endpoints expected"),
        };
        let (a, b, c, d) = (f(g1.start), f(g1.end), f(g2.start), f(g2.end));
        let cr = ((a - c) * (b - d)) / ((a - d) * (b - c));
        let cr = if cr > 1.0 { 1.0 / cr } else { cr };
        (2.0 * cr.sqrt() / (1.0 - cr)).asinh()
    }

    /// Brute-force minimization of the distance between points of two
    /// geodesics, parametrized by arclength from their tops.
    fn minimized_distance(g1: &Geodesic, g2: &Geodesic) -> f64 {
        let frame_of = |g: &Geodesic| Frame(g.normalizer().unwrap().inverse());
        let (f1, f2) = (frame_of(g1), frame_of(g2));
        let p = |f: &Frame, s: f64| f.advance(s).point();
        let golden = |lo: f64, hi: f64, h: &dyn Fn(f64) -> f64| {
            let (mut a, mut b) = (lo, hi);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..200 {
                let c = b - r * (b - a);
                let d = a + r * (b - a);
                if h(c) < h(d) {
                    b = d
                } else {
                    a = c
                }
            }
            0.5 * (a + b)
        };
        let inner = |s: f64| {
            let z = p(&f1, s);
            let t = golden(-40.0, 40.0, &|t| dist_h(z, p(&f2, t)).unwrap());
            dist_h(z, p(&f2, t)).unwrap()
        };
        let s = golden(-40.0, 40.0, &inner);
        inner(s)
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in -3.0f64..3.0, b in 0.05f64..4.0, c in -3.0f64..3.0,
                               d in 0.05f64..4.0, e in -3.0f64..3.0, f in 0.05f64..4.0) {
            let (x, y, z) = (pt(a, b), pt(c, d), pt(e, f));
            let xy = dist_h(x, y).unwrap();
            let yz = dist_h(y, z).unwrap();
            let xz = dist_h(x, z).unwrap();
            prop_assert!(xz <= xy + yz + 1e-12 * (1.0 + xz));
            prop_assert!((xy - dist_h(y, x).unwrap()).abs() <= 1e-15 * (1.0 + xy));
        }

        #[test]
        fn mobius_invariance(x0 in -2.0f64..2.0, y0 in 0.1f64..3.0, x1 in -2.0f64..2.0,
                             y1 in 0.1f64..3.0, a in 0.3f64..2.0, b in -2.0f64..2.0,
                             c in -2.0f64..2.0) {
            // d chosen so that ad - bc = 1
            let d = (1.0 + b * c) / a;
            let m = Mobius { a, b, c, d };
            let (z, w) = (pt(x0, y0), pt(x1, y1));
            let before = dist_h(z, w).unwrap();
            let after = dist_h(m.apply(z), m.apply(w)).unwrap();
            prop_assert!((before - after).abs() <= 1e-10 * (1.0 + before));
        }

        #[test]
        fn hexagon_law_is_an_involution(a1 in 0.05f64..4.0, a2 in 0.05f64..4.0, a3 in 0.05f64..4.0) {
            let h = hexagon_seams(a1, a2, a3).unwrap();
            let back = h.alternate_from_seams().unwrap();
            for (x, y) in back.iter().zip([a1, a2, a3]) {
                prop_assert!((x - y).abs() <= 1e-10 * y.max(1.0), "{x} vs {y}");
            }
        }

        #[test]
        fn perpendicular_matches_cross_ratio(u in -3.0f64..-0.2, v in 0.2f64..3.0,
                                             shift in 0.1f64..5.0, width in 0.1f64..4.0) {
            let g1 = Geodesic::new(Ideal::Finite(u), Ideal::Finite(v));
            let g2 = Geodesic::new(Ideal::Finite(v + shift), Ideal::Finite(v + shift + width));
            let (f1, f2, len) = common_perpendicular_foot(&g1, &g2).unwrap();
            let oracle = cross_ratio_distance(&g1, &g2);
            prop_assert!((len - oracle).abs() <= 1e-9 * (1.0 + oracle));
            prop_assert!((dist_h(f1, f2).unwrap() - len).abs() <= 1e-9 * (1.0 + len));
        }
    }

    #[test]
    fn perpendicular_matches_numeric_minimum() {
        let cases = [(-1.0, 0.5, 1.2, 3.0), (-2.0, -0.3, 0.1, 0.4), (0.0, 1.0, 2.0, 7.0)];
        for (a, b, c, d) in cases {
            let g1 = Geodesic::new(Ideal::Finite(a), Ideal::Finite(b));
            let g2 = Geodesic::new(Ideal::Finite(c), Ideal::Finite(d));
            let (_, _, len) = common_perpendicular_foot(&g1, &g2).unwrap();
            let brute = minimized_distance(&g1, &g2);
            assert!((len - brute).abs() < 1e-7, "{len} vs {brute}");
        }
    }

    #[test]
    fn perpendicular_is_isometry_invariant() {
        let g1 = Geodesic::new(Ideal::Finite(-1.0), Ideal::Finite(0.5));
        let g2 = Geodesic::new(Ideal::Finite(1.5), Ideal::Infinity);
        let (_, _, len) = common_perpendicular_foot(&g1, &g2).unwrap();
        let m = Mobius::normalized(2.0, 1.0, 0.5, 3.0).unwrap();
        let (_, _, len2) =
            common_perpendicular_foot(&g1.transformed(&m), &g2.transformed(&m)).unwrap();
        assert!((len - len2).abs() < 1e-12);
    }

    #[test]
    fn symmetric_hexagon_has_equal_seams() {
        let h = hexagon_seams(0.7, 0.7, 0.7).unwrap();
        assert!((h.seam_sides[0] - h.seam_sides[1]).abs() < 1e-14);
        assert!((h.seam_sides[1] - h.seam_sides[2]).abs() < 1e-14);
    }

    #[test]
    fn hexagon_errors() {
        assert!(matches!(hexagon_seams(0.0, 1.0, 1.0), Err(Error::InvalidLength(_))));
        assert!(matches!(hexagon_seams(-1.0, 1.0, 1.0), Err(Error::InvalidLength(_))));
        assert!(matches!(hexagon_seams(800.0, 800.0, 800.0), Err(Error::Range(_))));
    }

    #[test]
    fn seams_shrink_as_alternate_sides_grow() {
        let mut prev = f64::INFINITY;
        for i in 0..60 {
            let a = 0.05 * 1.15f64.powi(i);
            let h = hexagon_seams(a, a, a).unwrap();
            let closed = {
                let c = a.cosh();
                let s = a.sinh();
                ((c * c + c) / (s * s)).acosh()
            };
            // the direct closed form loses precision once cosh b is close to 1
            if a < 6.0 {
                assert!((h.seam_sides[0] - closed).abs() <= 1e-9 * closed.max(1.0));
            }
            assert!(h.seam_sides[0] < prev);
            prev = h.seam_sides[0];
        }
    }

    /// Geometric oracle: shoot three geodesics with unknown gaps, drop common
    /// perpendiculars between them, and adjust the gaps until the measured
    /// alternate sides match the requested ones.
    fn perpendicular_oracle(a: [f64; 3]) -> [f64; 3] {
        let quarter = std::f64::consts::FRAC_PI_2;
        // the perpendicular must leave side 0 at its start and side 2 at
        // distance a_2 from its start
        let measure = |b01: f64, b12: f64| -> Option<(f64, f64, f64)> {
            let f0 = Frame::STANDARD;
            let f1 = f0.advance(a[0]).turn(quarter).advance(b01).turn(quarter);
            let f2 = f1.advance(a[1]).turn(quarter).advance(b12).turn(quarter);
            let (l0, l2) = (f0.geodesic(), f2.geodesic());
            let (foot0, foot2, b20) = common_perpendicular_foot(&l0, &l2).ok()?;
            let a0 = f0.fermi_coords(foot0).1;
            let a2 = f2.fermi_coords(foot2).1;
            Some((a0, a2, b20))
        };
        let (mut x, mut y) = (4.0, 4.0);
        for _ in 0..200 {
            let (m0, m2, _) = measure(x, y).unwrap();
            let r = [m0, m2 - a[2]];
            if r[0].abs().max(r[1].abs()) < 1e-13 {
                break;
            }
            let h = 1e-7;
            let (px0, px2, _) = measure(x + h, y).unwrap();
            let (py0, py2, _) = measure(x, y + h).unwrap();
            let j = [[(px0 - m0) / h, (py0 - m0) / h], [(px2 - m2) / h, (py2 - m2) / h]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let dx = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
            let dy = (j[0][0] * r[1] - j[1][0] * r[0]) / det;
            let mut step = 1.0f64.min(0.5 / dx.abs().max(dy.abs()));
            // back off until the two lines stay ultraparallel and we improve
            loop {
                let (nx, ny) = (x - step * dx, y - step * dy);
                if nx > 0.0 && ny > 0.0 {
                    if let Some((n0, n2, _)) = measure(nx, ny) {
                        let nr = n0.abs().max((n2 - a[2]).abs());
                        if nr < r[0].abs().max(r[1].abs()) || step < 1e-6 {
                            x = nx;
                            y = ny;
                            break;
                        }
                    }
                }
                step *= 0.5;
                assert!(step > 1e-12, "oracle stalled");
            }
        }
        let (_, _, b20) = measure(x, y).unwrap();
        // seam opposite a_2 is b01, opposite a_0 is b12, opposite a_1 is b20
        [y, b20, x]
    }

    #[test]
    fn hexagon_law_matches_perpendicular_construction() {
        for a in [[0.5, 0.5, 0.005], [1.0, 0.3, 2.0], [0.05, 0.5, 0.5]] {
            let oracle = perpendicular_oracle(a);
            let h = hexagon_seams(a[0], a[1], a[2]).unwrap();
            for k in 0..3 {
                assert!(
                    (h.seam_sides[k] - oracle[k]).abs() < 1e-8,
                    "{a:?}: {:?} vs {:?}",
                    h.seam_sides,
                    oracle
                );
            }
        }
    }

    #[test]
    fn chart_closes_and_incenter_is_equidistant() {
        for a in [[0.5, 0.5, 0.05], [1.0, 1.0, 1.0], [0.25, 1.3, 0.7]] {
            let h = hexagon_seams(a[0], a[1], a[2]).unwrap();
            let chart = h.chart();
            assert!(chart.closure_defect() < 1e-10, "{}", chart.closure_defect());
            let o = chart.incenter().unwrap();
            let d: Vec<f64> = (0..3).map(|k| chart.alt_frames[k].fermi_coords(o).0).collect();
            assert!(d.iter().all(|&x| x > 0.0));
            assert!((d[0] - d[1]).abs() < 1e-10 && (d[1] - d[2]).abs() < 1e-10, "{d:?}");
            // the third bisector passes through it too
            let (rho, _) = chart.bisector_frame(2).fermi_coords(o);
            assert!(rho.abs() < 1e-10);
        }
    }
}
