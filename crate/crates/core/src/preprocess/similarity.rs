use crate::error::{Error, Result};

/// `x' = a·x − b·y + tx`, `y' = b·x + a·y + ty`, i.e. scale `√(a²+b²)` and
/// rotation `atan2(b, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub ty: f64,
}

impl SimilarityTransform {
    pub const IDENTITY: Self = Self { a: 1.0, b: 0.0, tx: 0.0, ty: 0.0 };

    pub fn from_parts(scale: f64, theta: f64, tx: f64, ty: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Invalid(format!("similarity scale must be positive, got {scale}")));
        }
        Ok(Self { a: scale * theta.cos(), b: scale * theta.sin(), tx, ty })
    }

    pub fn scale(&self) -> f64 {
        self.a.hypot(self.b)
    }

    pub fn rotation(&self) -> f64 {
        self.b.atan2(self.a)
    }

    /// `[[a, −b, tx], [b, a, ty]]`.
    pub fn matrix(&self) -> [[f64; 3]; 2] {
        [[self.a, -self.b, self.tx], [self.b, self.a, self.ty]]
    }

    pub fn apply(&self, [x, y]: [f64; 2]) -> [f64; 2] {
        [self.a * x - self.b * y + self.tx, self.b * x + self.a * y + self.ty]
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.a * self.a + self.b * self.b;
        if !(det > 0.0 && det.is_finite()) {
            return Err(Error::Invalid("similarity transform is not invertible".into()));
        }
        let (a, b) = (self.a / det, -self.b / det);
        Ok(Self { a, b, tx: -(a * self.tx - b * self.ty), ty: -(b * self.tx + a * self.ty) })
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &Self) -> Self {
        Self {
            a: self.a * first.a - self.b * first.b,
            b: self.b * first.a + self.a * first.b,
            tx: self.a * first.tx - self.b * first.ty + self.tx,
            ty: self.b * first.tx + self.a * first.ty + self.ty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub transform: SimilarityTransform,
    /// Root-mean-square distance between mapped source points and targets.
    pub residual: f64,
}

/// Least-squares similarity taking `src` onto `dst`.
///
/// Centering both sets removes the translation; the remaining problem is
/// linear in `(a, b)` and solved in closed form.
pub fn estimate_similarity(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<Alignment> {
    if src.len() != dst.len() {
        return Err(Error::shape("estimate_similarity", format!("{} source vs {} target points", src.len(), dst.len())));
    }
    if src.len() < 2 {
        return Err(Error::Invalid("at least two point pairs are needed".into()));
    }
    if src.iter().chain(dst).flatten().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite landmark coordinate".into()));
    }
    let n = src.len() as f64;
    let mean = |pts: &[[f64; 2]]| {
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    };
    let ms = mean(src);
    let md = mean(dst);
    let (mut norm, mut dot, mut cross) = (0.0, 0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let (sx, sy) = (s[0] - ms[0], s[1] - ms[1]);
        let (dx, dy) = (d[0] - md[0], d[1] - md[1]);
        norm += sx * sx + sy * sy;
        dot += sx * dx + sy * dy;
        cross += sx * dy - sy * dx;
    }
    let spread = src.iter().map(|p| p[0].abs().max(p[1].abs())).fold(1.0, f64::max);
    if norm <= 1e-12 * spread * spread * n {
        return Err(Error::Invalid("source landmarks are coincident".into()));
    }
    let a = dot / norm;
    let b = cross / norm;
    if a == 0.0 && b == 0.0 {
        return Err(Error::Invalid("target landmarks are coincident".into()));
    }
    let transform = SimilarityTransform { a, b, tx: md[0] - (a * ms[0] - b * ms[1]), ty: md[1] - (b * ms[0] + a * ms[1]) };
    let sq: f64 = src
        .iter()
        .zip(dst)
        .map(|(s, d)| {
            let m = transform.apply(*s);
            (m[0] - d[0]).powi(2) + (m[1] - d[1]).powi(2)
        })
        .sum();
    Ok(Alignment { transform, residual: (sq / n).sqrt() })
}
