//! Real 2-vector and 2×2 matrix helpers.

pub type Vec2 = [f64; 2];

pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

pub fn norm2(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

pub fn norm_inf(a: Vec2) -> f64 {
    a[0].abs().max(a[1].abs())
}

pub fn dist_inf(a: Vec2, b: Vec2) -> f64 {
    norm_inf(sub(a, b))
}

pub fn dist2(a: Vec2, b: Vec2) -> f64 {
    norm2(sub(a, b))
}
