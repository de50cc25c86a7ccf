use crate::model::InputShape;
use crate::numerics::Rng;

/// Light training-time augmentation. Only applies to image-shaped samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Augmentation {
    /// Maximum integer shift per axis, 0..=4.
    pub shift_pixels: usize,
    pub horizontal_flip: bool,
}

impl Augmentation {
    pub fn is_identity(&self) -> bool {
        self.shift_pixels == 0 && !self.horizontal_flip
    }
}

/// Moves content by `dx` columns and `dy` rows, filling vacated pixels with 0.
pub fn shift_image(img: &[f64], shape: InputShape, dx: isize, dy: isize) -> Vec<f64> {
    let InputShape::Image { height, width, channels } = shape else {
        return img.to_vec();
    };
    let mut out = vec![0.0; img.len()];
    for y in 0..height {
        let sy = y as isize - dy;
        if sy < 0 || sy >= height as isize {
            continue;
        }
        for x in 0..width {
            let sx = x as isize - dx;
            if sx < 0 || sx >= width as isize {
                continue;
            }
            let dst = (y * width + x) * channels;
            let src = (sy as usize * width + sx as usize) * channels;
            out[dst..dst + channels].copy_from_slice(&img[src..src + channels]);
        }
    }
    out
}

pub fn flip_horizontal(img: &[f64], shape: InputShape) -> Vec<f64> {
    let InputShape::Image { height, width, channels } = shape else {
        return img.to_vec();
    };
    let mut out = vec![0.0; img.len()];
    for y in 0..height {
        for x in 0..width {
            let dst = (y * width + x) * channels;
            let src = (y * width + (width - 1 - x)) * channels;
            out[dst..dst + channels].copy_from_slice(&img[src..src + channels]);
        }
    }
    out
}

/// Random shift in `[-s, s]^2` then, if enabled, a flip with probability 1/2.
/// Draws nothing from `rng` when the augmentation is the identity.
pub fn augment(img: &[f64], shape: InputShape, cfg: &Augmentation, rng: &mut Rng) -> Vec<f64> {
    if cfg.is_identity() || matches!(shape, InputShape::Flat(_)) {
        return img.to_vec();
    }
    let mut out = if cfg.shift_pixels > 0 {
        let span = 2 * cfg.shift_pixels as u64 + 1;
        let s = cfg.shift_pixels as isize;
        let dx = rng.below(span) as isize - s;
        let dy = rng.below(span) as isize - s;
        shift_image(img, shape, dx, dy)
    } else {
        img.to_vec()
    };
    if cfg.horizontal_flip && rng.coin() {
        out = flip_horizontal(&out, shape);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHAPE: InputShape = InputShape::Image { height: 3, width: 4, channels: 1 };

    fn one_hot(x: usize, y: usize) -> Vec<f64> {
        let mut v = vec![0.0; 12];
        v[y * 4 + x] = 1.0;
        v
    }

    #[test]
    fn identity_config() {
        let img: Vec<f64> = (0..12).map(|v| v as f64 / 11.0).collect();
        let mut rng = Rng::new(1);
        let before = rng.clone();
        assert_eq!(augment(&img, SHAPE, &Augmentation::default(), &mut rng), img);
        assert_eq!(rng, before);
    }

    #[test]
    fn shift_moves_hot_pixel() {
        assert_eq!(shift_image(&one_hot(1, 1), SHAPE, 1, 0), one_hot(2, 1));
        assert_eq!(shift_image(&one_hot(1, 1), SHAPE, 0, -1), one_hot(1, 0));
        assert_eq!(shift_image(&one_hot(3, 1), SHAPE, 1, 0), vec![0.0; 12]);
    }

    #[test]
    fn flip_of_symmetric_image_is_identity() {
        let row = [0.1, 0.7, 0.7, 0.1];
        let img: Vec<f64> = row.iter().chain(&row).chain(&row).copied().collect();
        assert_eq!(flip_horizontal(&img, SHAPE), img);
        assert_eq!(flip_horizontal(&one_hot(0, 2), SHAPE), one_hot(3, 2));
    }

    #[test]
    fn values_stay_in_unit_interval() {
        let img: Vec<f64> = (0..12).map(|v| v as f64 / 11.0).collect();
        let cfg = Augmentation { shift_pixels: 2, horizontal_flip: true };
        let mut rng = Rng::new(4);
        for _ in 0..100 {
            assert!(augment(&img, SHAPE, &cfg, &mut rng).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
