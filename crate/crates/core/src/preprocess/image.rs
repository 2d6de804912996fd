use crate::error::{Error, Result};

/// Single-channel image, row-major. Pixel centers sit at integer coordinates,
/// `x` is the column and `y` the row.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Invalid(format!("empty image {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::shape("plane", format!("{} values for {height}x{width}", data.len())));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0.0; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    fn get_or_zero(&self, y: i64, x: i64) -> f32 {
        if y < 0 || x < 0 || y >= self.height as i64 || x >= self.width as i64 {
            0.0
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    /// Bilinear sample; neighbours outside the image contribute zero.
    pub fn sample(&self, x: f64, y: f64) -> f32 {
        if !(x > -1.0 && y > -1.0 && x < self.width as f64 && y < self.height as f64) {
            return 0.0;
        }
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let top = (1.0 - fx) * self.get_or_zero(y0, x0) as f64 + fx * self.get_or_zero(y0, x0 + 1) as f64;
        let bottom = (1.0 - fx) * self.get_or_zero(y0 + 1, x0) as f64 + fx * self.get_or_zero(y0 + 1, x0 + 1) as f64;
        ((1.0 - fy) * top + fy * bottom) as f32
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.height, self.width, |y, x| self.get(y, self.width - 1 - x))
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self { height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// Interleaved RGB image with intensities on the 0–255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Invalid(format!("empty image {height}x{width}")));
        }
        if data.len() != height * width * 3 {
            return Err(Error::shape("rgb image", format!("{} values for {height}x{width}x3", data.len())));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Standard-definition luma.
pub fn to_grayscale(image: &RgbImage) -> Plane {
    let data = image
        .data
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) as f32)
        .collect();
    Plane { height: image.height, width: image.width, data }
}
