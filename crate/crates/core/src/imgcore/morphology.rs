//! Binary morphology with a square element. Windows are clipped at the
//! image border, so erosion treats the outside as set and dilation treats it
//! as clear; the pair stays an adjunction and open/close remain idempotent.

use super::{BinaryMask, StructuringElement};

/// Runs a separable sliding-window reduction: `any` for dilation, `all` for erosion.
fn sliding(mask: &BinaryMask, se: StructuringElement, want_any: bool) -> BinaryMask {
    let (w, h) = mask.dims();
    let r = se.radius();
    let src = mask.bits();

    fn reduce(mut window: impl Iterator<Item = bool>, want_any: bool) -> bool {
        if want_any {
            window.any(|b| b)
        } else {
            window.all(|b| b)
        }
    }

    let mut horiz = vec![false; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            horiz[y * w + x] = reduce(row[lo..=hi].iter().copied(), want_any);
        }
    }

    let mut out = vec![false; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            out[y * w + x] = reduce((lo..=hi).map(|yy| horiz[yy * w + x]), want_any);
        }
    }
    BinaryMask::from_parts(w, h, out)
}

pub fn erode(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    sliding(mask, se, false)
}

pub fn dilate(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    sliding(mask, se, true)
}

pub fn open(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}

pub fn close(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    erode(&dilate(mask, se), se)
}

/// `close(open(mask))`: drops specks smaller than the element, then fills
/// gaps smaller than it.
pub fn morph_open_close(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    close(&open(mask, se), se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn se(n: usize) -> StructuringElement {
        StructuringElement::square(n).unwrap()
    }

    /// Direct 2-D window scan, no separability.
    fn oracle(mask: &BinaryMask, size: usize, any: bool) -> BinaryMask {
        let r = (size / 2) as isize;
        let (w, h) = mask.dims();
        BinaryMask::from_fn(w, h, |x, y| {
            let mut hit_any = false;
            let mut hit_all = true;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (xx, yy) = (x as isize + dx, y as isize + dy);
                    if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                        continue;
                    }
                    let b = mask.get(xx as usize, yy as usize);
                    hit_any |= b;
                    hit_all &= b;
                }
            }
            if any {
                hit_any
            } else {
                hit_all
            }
        })
        .unwrap()
    }

    #[test]
    fn all_ones_survives() {
        let m = BinaryMask::ones(17, 11).unwrap();
        assert_eq!(morph_open_close(&m, se(5)), m);
    }

    #[test]
    fn isolated_pixel_removed() {
        let mut m = BinaryMask::zeros(21, 21).unwrap();
        m.set(10, 10, true);
        let out = morph_open_close(&m, se(5));
        assert!(out.is_all_zero());
        let by_oracle = oracle(&oracle(&oracle(&oracle(&m, 5, false), 5, true), 5, true), 5, false);
        assert_eq!(out, by_oracle);
    }

    #[test]
    fn large_block_unchanged() {
        let m = BinaryMask::from_fn(64, 64, |x, y| (20..40).contains(&x) && (22..42).contains(&y))
            .unwrap();
        assert_eq!(morph_open_close(&m, se(5)), m);
    }

    proptest! {
        #[test]
        fn separable_matches_direct_scan(
            w in 1usize..20, h in 1usize..20, seed in any::<u64>(), size in prop::sample::select(vec![1usize, 3, 5, 7])
        ) {
            let mut state = seed | 1;
            let m = BinaryMask::from_fn(w, h, |_, _| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                state % 3 == 0
            }).unwrap();
            prop_assert_eq!(erode(&m, se(size)), oracle(&m, size, false));
            prop_assert_eq!(dilate(&m, se(size)), oracle(&m, size, true));
        }

        #[test]
        fn open_close_is_idempotent(w in 1usize..30, h in 1usize..30, seed in any::<u64>()) {
            let mut state = seed | 1;
            let m = BinaryMask::from_fn(w, h, |_, _| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                state % 2 == 0
            }).unwrap();
            let once = morph_open_close(&m, se(5));
            prop_assert_eq!(morph_open_close(&once, se(5)), once);
        }
    }
}
