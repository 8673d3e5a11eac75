//! Seeded, non-overlapping sprite placement for synthetic images.
//!
//! Classes are processed in pool order and objects within a class one after
//! another, so each accepted box constrains every later one. For each object
//! the sprite and transform are drawn once, then up to `max_attempts` uniform
//! positions are tried; if all of them collide the object is skipped.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::bbox::BBox;
use crate::label::GroundTruthAnnotation;
use crate::raster::{composite_in_place, PixelBox, Raster, Sprite};
use crate::transform::{apply_transform, Transform, MAX_SCALE};
use crate::{Error, Result};

/// Inclusive object-count range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountRange {
    pub min: u32,
    pub max: u32,
}

impl CountRange {
    pub fn new(min: u32, max: u32) -> Result<Self> {
        if min > max {
            return Err(Error::InvalidConfig(alloc::format!("count range {min}-{max} has min > max")));
        }
        Ok(Self { min, max })
    }

    pub fn fixed(n: u32) -> Self {
        Self { min: n, max: n }
    }

    /// Expected value of a uniform draw.
    pub fn mean(&self) -> f64 {
        (self.min as f64 + self.max as f64) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlacementParams {
    /// Uniform scale range `(lo, hi)`.
    pub scale_range: (f64, f64),
    /// Draw angles uniformly from [0, 360) when set, else always 0.
    pub rotation: bool,
    /// Independent probabilities of a horizontal and a vertical flip.
    pub flip_probability: (f64, f64),
    pub max_attempts: u32,
    /// Extra spacing between boxes, in pixels.
    pub margin: u32,
    pub strict_count: bool,
}

impl Default for PlacementParams {
    fn default() -> Self {
        Self {
            scale_range: (0.8, 1.2),
            rotation: true,
            flip_probability: (0.5, 0.5),
            max_attempts: 100,
            margin: 0,
            strict_count: false,
        }
    }
}

impl PlacementParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi <= MAX_SCALE) {
            return Err(Error::InvalidConfig(alloc::format!(
                "scale range ({lo}, {hi}) must satisfy 0 < lo <= hi <= {MAX_SCALE}"
            )));
        }
        let (ph, pv) = self.flip_probability;
        if !(0.0..=1.0).contains(&ph) || !(0.0..=1.0).contains(&pv) {
            return Err(Error::InvalidConfig("flip probabilities must lie in [0, 1]".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidConfig("max placement attempts must be positive".into()));
        }
        Ok(())
    }

    /// Minimum gap between two boxes. Touching boxes always conflict: six-decimal
    /// label rounding could otherwise turn a shared edge into a sliver of overlap.
    fn min_gap(&self) -> i64 {
        self.margin.max(1) as i64
    }
}

/// Sprites available for one class.
#[derive(Debug, Clone, Copy)]
pub struct ClassPool<'a> {
    pub class_id: u32,
    pub sprites: &'a [Sprite],
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Placement {
    pub source_id: String,
    pub class_id: u32,
    pub transform: Transform,
    /// Top-left corner of the transformed sprite.
    pub position: (u32, u32),
    /// Placed opaque extent in pixels.
    pub pixel_box: PixelBox,
    pub bbox: BBox,
}

impl Placement {
    pub fn annotation(&self) -> GroundTruthAnnotation {
        GroundTruthAnnotation::new(self.class_id, self.bbox)
    }
}

/// A placement together with the transformed sprite it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedSprite {
    pub placement: Placement,
    pub sprite: Sprite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SkippedObject {
    pub class_id: u32,
    /// Index of the object within its class target.
    pub object_index: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlacementOutcome {
    pub placed: Vec<PlacedSprite>,
    pub skipped: Vec<SkippedObject>,
}

impl PlacementOutcome {
    pub fn annotations(&self) -> Vec<GroundTruthAnnotation> {
        self.placed.iter().map(|p| p.placement.annotation()).collect()
    }

    /// Realized count for `class_id`.
    pub fn count(&self, class_id: u32) -> usize {
        self.placed.iter().filter(|p| p.placement.class_id == class_id).count()
    }
}

/// Uniform index into a pool of `n` items (`n` > 0).
pub fn choose_index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    rng.random_range(0..n)
}

/// Draws one target count per range, uniformly and inclusively.
pub fn draw_targets<R: Rng + ?Sized>(rng: &mut R, ranges: &[CountRange]) -> Vec<u32> {
    ranges.iter().map(|r| rng.random_range(r.min..=r.max)).collect()
}

fn draw_transform<R: Rng + ?Sized>(rng: &mut R, params: &PlacementParams) -> Result<Transform> {
    let angle = if params.rotation {
        rng.random_range(0.0..360.0)
    } else {
        0.0
    };
    let (lo, hi) = params.scale_range;
    let scale = if lo == hi { lo } else { rng.random_range(lo..=hi) };
    let flip_h = rng.random_bool(params.flip_probability.0);
    let flip_v = rng.random_bool(params.flip_probability.1);
    Transform::new(angle, scale, flip_h, flip_v)
}

fn separated(a: &PixelBox, b: &PixelBox, gap: i64) -> bool {
    let gap_x = (b.x0 as i64 - a.x1() as i64).max(a.x0 as i64 - b.x1() as i64);
    let gap_y = (b.y0 as i64 - a.y1() as i64).max(a.y0 as i64 - b.y1() as i64);
    gap_x >= gap || gap_y >= gap
}

/// Places `targets[i]` objects from `pools[i]` onto a `bg_size` canvas.
///
/// `targets` is aligned with `pools`. With `strict_count` any skipped object
/// turns into [`Error::CountShortfall`].
pub fn sample_placements<R: Rng + ?Sized>(
    rng: &mut R,
    bg_size: (u32, u32),
    pools: &[ClassPool<'_>],
    targets: &[u32],
    params: &PlacementParams,
) -> Result<PlacementOutcome> {
    params.validate()?;
    if pools.len() != targets.len() {
        return Err(Error::InvalidConfig("one target per class pool required".into()));
    }
    let (bw, bh) = bg_size;
    let gap = params.min_gap();
    let mut out = PlacementOutcome::default();

    for (pool, &target) in pools.iter().zip(targets) {
        if target == 0 {
            continue;
        }
        if pool.sprites.is_empty() {
            return Err(Error::EmptyPool { class_id: pool.class_id });
        }
        for object_index in 0..target {
            let source = &pool.sprites[rng.random_range(0..pool.sprites.len())];
            let transform = draw_transform(rng, params)?;
            let sprite = apply_transform(source, &transform)?;
            let (sw, sh) = (sprite.width(), sprite.height());
            if sw > bw || sh > bh {
                return Err(Error::SpriteTooLarge {
                    source_id: source.source_id.clone(),
                    width: sw,
                    height: sh,
                    bg_width: bw,
                    bg_height: bh,
                });
            }

            let mut accepted = None;
            for _ in 0..params.max_attempts {
                let x0 = rng.random_range(0..=bw - sw);
                let y0 = rng.random_range(0..=bh - sh);
                let candidate = PixelBox { x0, y0, w: sw, h: sh };
                if out
                    .placed
                    .iter()
                    .all(|p| separated(&candidate, &p.placement.pixel_box, gap))
                {
                    accepted = Some(candidate);
                    break;
                }
            }

            match accepted {
                Some(pixel_box) => {
                    let bbox = BBox::from_pixel_box(&pixel_box, bw, bh)?.snapped();
                    out.placed.push(PlacedSprite {
                        placement: Placement {
                            source_id: source.source_id.clone(),
                            class_id: pool.class_id,
                            transform,
                            position: (pixel_box.x0, pixel_box.y0),
                            pixel_box,
                            bbox,
                        },
                        sprite,
                    });
                }
                None => out.skipped.push(SkippedObject {
                    class_id: pool.class_id,
                    object_index,
                }),
            }
        }
    }

    if params.strict_count && !out.skipped.is_empty() {
        return Err(Error::CountShortfall {
            skipped: out.skipped.len(),
        });
    }
    Ok(out)
}

/// Composites every placed sprite onto `canvas` in placement order.
pub fn render(canvas: &mut Raster, placed: &[PlacedSprite]) -> Result<()> {
    for p in placed {
        let (x, y) = p.placement.position;
        composite_in_place(canvas, p.sprite.raster(), x, y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::opaque_extent;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn disk(radius: u32, id: &str) -> Sprite {
        let d = radius * 2 + 1;
        let mut r = Raster::transparent(d, d).unwrap();
        for y in 0..d {
            for x in 0..d {
                let (dx, dy) = (x as i64 - radius as i64, y as i64 - radius as i64);
                if dx * dx + dy * dy <= (radius * radius) as i64 {
                    r.set_pixel(x, y, [20, 150, 30, 255]);
                }
            }
        }
        Sprite::new(r, "palm", id).unwrap()
    }

    #[test]
    fn single_object_on_large_canvas() {
        let sprites = vec![disk(5, "a")];
        let pools = [ClassPool { class_id: 0, sprites: &sprites }];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let targets = draw_targets(&mut rng, &[CountRange::fixed(1)]);
        let out = sample_placements(&mut rng, (4000, 2250), &pools, &targets, &PlacementParams::default()).unwrap();
        assert_eq!(out.placed.len(), 1);
        assert!(out.skipped.is_empty());
    }

    #[test]
    fn boxes_are_disjoint_and_contained() {
        let sprites = vec![disk(6, "a"), disk(9, "b"), disk(4, "c")];
        let pools = [ClassPool { class_id: 0, sprites: &sprites }];
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = sample_placements(&mut rng, (320, 180), &pools, &[25], &PlacementParams::default()).unwrap();
            for (i, a) in out.placed.iter().enumerate() {
                let (x0, y0, x1, y1) = a.placement.bbox.corners();
                assert!(x0 >= 0.0 && y0 >= 0.0 && x1 <= 1.0 && y1 <= 1.0);
                for b in &out.placed[i + 1..] {
                    assert_eq!(a.placement.pixel_box.intersection_area(&b.placement.pixel_box), 0);
                    assert_eq!(a.placement.bbox.intersection_area(&b.placement.bbox), 0.0);
                }
            }
            assert_eq!(out.placed.len() + out.skipped.len(), 25);
        }
    }

    #[test]
    fn labels_match_placed_pixels() {
        let sprites = vec![disk(7, "a")];
        let pools = [ClassPool { class_id: 0, sprites: &sprites }];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = sample_placements(&mut rng, (200, 200), &pools, &[10], &PlacementParams::default()).unwrap();
        for p in &out.placed {
            let e = opaque_extent(&p.sprite).unwrap();
            assert_eq!((e.x0, e.y0, e.w, e.h), (0, 0, p.sprite.width(), p.sprite.height()));
            assert_eq!(p.placement.pixel_box.w, p.sprite.width());
            assert_eq!(p.placement.position, (p.placement.pixel_box.x0, p.placement.pixel_box.y0));
        }
    }

    #[test]
    fn saturated_canvas_skips_and_strict_mode_errors() {
        let sprites = vec![disk(10, "a")];
        let pools = [ClassPool { class_id: 0, sprites: &sprites }];
        let params = PlacementParams {
            rotation: false,
            scale_range: (1.0, 1.0),
            max_attempts: 5,
            ..PlacementParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = sample_placements(&mut rng, (50, 50), &pools, &[20], &params).unwrap();
        assert!(!out.skipped.is_empty());
        assert_eq!(out.placed.len() + out.skipped.len(), 20);

        let strict = PlacementParams { strict_count: true, ..params };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let err = sample_placements(&mut rng, (50, 50), &pools, &[20], &strict).unwrap_err();
        assert!(matches!(err, Error::CountShortfall { .. }));
    }

    #[test]
    fn oversized_sprite_is_an_error() {
        let sprites = vec![disk(30, "big")];
        let pools = [ClassPool { class_id: 0, sprites: &sprites }];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = sample_placements(&mut rng, (40, 40), &pools, &[1], &PlacementParams::default()).unwrap_err();
        assert!(matches!(err, Error::SpriteTooLarge { .. }));
    }

    #[test]
    fn empty_pool_is_an_error() {
        let pools = [ClassPool { class_id: 2, sprites: &[] }];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = sample_placements(&mut rng, (40, 40), &pools, &[1], &PlacementParams::default()).unwrap_err();
        assert_eq!(err, Error::EmptyPool { class_id: 2 });
    }

    #[test]
    fn margin_is_respected() {
        let sprites = vec![disk(3, "a")];
        let pools = [ClassPool { class_id: 0, sprites: &sprites }];
        let params = PlacementParams { margin: 6, ..PlacementParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = sample_placements(&mut rng, (300, 300), &pools, &[30], &params).unwrap();
        for (i, a) in out.placed.iter().enumerate() {
            for b in &out.placed[i + 1..] {
                assert!(separated(&a.placement.pixel_box, &b.placement.pixel_box, 6));
            }
        }
    }

    #[test]
    fn targets_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ranges = [CountRange::new(15, 25).unwrap(), CountRange::new(0, 2).unwrap()];
        for _ in 0..500 {
            let t = draw_targets(&mut rng, &ranges);
            assert!((15..=25).contains(&t[0]) && t[1] <= 2);
        }
        assert!(CountRange::new(3, 2).is_err());
    }

    #[test]
    fn params_validation() {
        let bad = PlacementParams { scale_range: (0.0, 1.0), ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PlacementParams { flip_probability: (1.5, 0.0), ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PlacementParams { max_attempts: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn render_only_touches_placed_extents() {
        let sprites = vec![disk(4, "a")];
        let pools = [ClassPool { class_id: 0, sprites: &sprites }];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = sample_placements(&mut rng, (64, 64), &pools, &[5], &PlacementParams::default()).unwrap();
        let bg = Raster::filled(64, 64, [90, 60, 40, 255]).unwrap();
        let mut canvas = bg.clone();
        render(&mut canvas, &out.placed).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                if canvas.pixel(x, y) != bg.pixel(x, y) {
                    assert!(out.placed.iter().any(|p| p.placement.pixel_box.contains(x, y)));
                }
            }
        }
    }
}
