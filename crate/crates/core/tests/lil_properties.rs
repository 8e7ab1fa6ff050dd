use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use radiocal::lil::{lil_convert, GroupMode, Image8, IntImage, Layout, Scope};
use radiocal::{BayerPattern, CropRect};

/// Group of sample `i` under the conversion's grouping rules.
fn group_of(img: &IntImage, mode: GroupMode, i: usize) -> usize {
    if mode == GroupMode::Joint {
        return 0;
    }
    match img.layout {
        Layout::Gray => 0,
        Layout::Rgb => i % 3,
        Layout::Mosaic(p) => {
            let w = img.width as usize;
            match p.channel_of((i % w) as u32, (i / w) as u32) {
                radiocal::Channel::R => 0,
                radiocal::Channel::G1 | radiocal::Channel::G2 => 1,
                radiocal::Channel::B => 2,
            }
        }
    }
}

/// Brute-force conversion: rank of each level among the occupied levels of its group.
fn oracle(images: &[IntImage], mode: GroupMode) -> Vec<Vec<u8>> {
    let mut sets: HashMap<usize, BTreeSet<u16>> = HashMap::new();
    for img in images {
        for (i, &v) in img.data.iter().enumerate() {
            sets.entry(group_of(img, mode, i)).or_default().insert(v);
        }
    }
    images
        .iter()
        .map(|img| {
            img.data
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let set = &sets[&group_of(img, mode, i)];
                    let rank = set.range(..v).count() as f64;
                    let d = set.len() as f64 - 1.0;
                    if d == 0.0 {
                        0
                    } else {
                        (255.0 * rank / d + 0.5).floor() as u8
                    }
                })
                .collect()
        })
        .collect()
}

fn layout_strategy() -> impl Strategy<Value = Layout> {
    prop_oneof![
        Just(Layout::Gray),
        Just(Layout::Rgb),
        (0u8..4).prop_map(|c| Layout::Mosaic(BayerPattern::from_code(c).unwrap())),
    ]
}

/// Series of same-shaped images with levels drawn from `span` values at a random offset.
fn series_strategy(depth: u8) -> impl Strategy<Value = Vec<IntImage>> {
    let max = (1u32 << depth) - 1;
    (layout_strategy(), 1u32..9, 1u32..9, 1usize..4, 1u32..600, 0u32..=max).prop_flat_map(
        move |(layout, w, h, frames, span, base)| {
            let n = (w * h) as usize * layout.channels();
            let span = span.min(max + 1);
            let base = base.min(max + 1 - span);
            prop::collection::vec(prop::collection::vec(0..span, n), frames).prop_map(move |frames| {
                frames
                    .into_iter()
                    .map(|v| {
                        let data = v.into_iter().map(|x| (base + x) as u16).collect();
                        IntImage::new(w, h, layout, depth, data).unwrap()
                    })
                    .collect()
            })
        },
    )
}

fn mode_strategy() -> impl Strategy<Value = GroupMode> {
    prop_oneof![Just(GroupMode::PerChannel), Just(GroupMode::Joint)]
}

fn as_int(img: &Image8) -> IntImage {
    IntImage::new(img.width, img.height, img.layout, 8, img.data.iter().map(|&b| b.into()).collect()).unwrap()
}

fn check_against_oracle(images: &[IntImage], mode: GroupMode) -> Result<(), TestCaseError> {
    let series = lil_convert(images, mode, Scope::Series, None).unwrap();
    let expected = oracle(images, mode);
    for (got, want) in series.images.iter().zip(&expected) {
        prop_assert_eq!(&got.data, want);
    }
    for (img, got) in images.iter().zip(&series.images) {
        let single = lil_convert(std::slice::from_ref(img), mode, Scope::Single, None).unwrap();
        prop_assert_eq!(&single.images[0].data, &oracle(std::slice::from_ref(img), mode)[0]);
        prop_assert_eq!(got.layout, img.layout);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn matches_oracle_12bit(images in series_strategy(12), mode in mode_strategy()) {
        check_against_oracle(&images, mode)?;
    }

    #[test]
    fn matches_oracle_14bit(images in series_strategy(14), mode in mode_strategy()) {
        check_against_oracle(&images, mode)?;
    }

    #[test]
    fn order_and_bijectivity(images in series_strategy(14), mode in mode_strategy()) {
        let out = lil_convert(&images, mode, Scope::Series, None).unwrap();
        let mut maps: HashMap<usize, Vec<(u16, u8)>> = HashMap::new();
        for (img, o) in images.iter().zip(&out.images) {
            for (i, (&v, &c)) in img.data.iter().zip(&o.data).enumerate() {
                maps.entry(group_of(img, mode, i)).or_default().push((v, c));
            }
        }
        for (g, mut pairs) in maps {
            pairs.sort_unstable();
            pairs.dedup();
            // one code per level
            prop_assert!(pairs.windows(2).all(|w| w[0].0 != w[1].0), "group {} maps a level twice", g);
            // order preserving
            prop_assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
            let levels = pairs.len();
            if levels <= 256 {
                prop_assert!(pairs.windows(2).all(|w| w[0].1 < w[1].1), "not injective at {} levels", levels);
            }
            if levels >= 2 {
                prop_assert_eq!(pairs[0].1, 0);
                prop_assert_eq!(pairs[levels - 1].1, 255);
            }
        }
    }

    #[test]
    fn idempotent(images in series_strategy(12), mode in mode_strategy()) {
        for scope in [Scope::Single, Scope::Series] {
            let once = lil_convert(&images, mode, scope, None).unwrap();
            let again_in: Vec<IntImage> = once.images.iter().map(as_int).collect();
            let twice = lil_convert(&again_in, mode, scope, None).unwrap();
            for (a, b) in once.images.iter().zip(&twice.images) {
                prop_assert_eq!(&a.data, &b.data);
            }
        }
    }

    #[test]
    fn adding_existing_levels_changes_nothing(images in series_strategy(12), mode in mode_strategy()) {
        // a copy of a frame adds pixels but no new levels
        let out = lil_convert(&images, mode, Scope::Series, None).unwrap();
        let mut padded = images.clone();
        padded.push(images[0].clone());
        let out2 = lil_convert(&padded, mode, Scope::Series, None).unwrap();
        for (a, b) in out.images.iter().zip(&out2.images) {
            prop_assert_eq!(&a.data, &b.data);
        }
        prop_assert_eq!(&out2.images[images.len()].data, &out.images[0].data);
    }

    #[test]
    fn crop_then_convert(images in series_strategy(12), mode in mode_strategy(), x0 in 0u32..4, y0 in 0u32..4) {
        let (w, h) = (images[0].width, images[0].height);
        prop_assume!(x0 < w && y0 < h);
        let rect = CropRect::new(x0, y0, w - x0, h - y0);
        let direct = lil_convert(&images, mode, Scope::Series, Some(&rect)).unwrap();
        let cropped: Vec<IntImage> = images.iter().map(|i| i.crop(&rect).unwrap()).collect();
        let expected = oracle(&cropped, mode);
        for (got, want) in direct.images.iter().zip(&expected) {
            prop_assert_eq!(&got.data, want);
        }
    }
}

#[test]
fn worked_mapping_in_all_layouts() {
    let gray = IntImage::new(4, 1, Layout::Gray, 12, vec![0, 5, 7, 4095]).unwrap();
    let out = lil_convert(&[gray], GroupMode::PerChannel, Scope::Single, None).unwrap();
    assert_eq!(out.images[0].data, vec![0, 85, 170, 255]);

    let rgb = IntImage::new(4, 1, Layout::Rgb, 12, [0u16, 5, 7, 4095].iter().flat_map(|&v| [v; 3]).collect()).unwrap();
    let out = lil_convert(&[rgb], GroupMode::PerChannel, Scope::Single, None).unwrap();
    assert_eq!(out.images[0].data, [0u8, 85, 170, 255].iter().flat_map(|&v| [v; 3]).collect::<Vec<_>>());
}

#[test]
fn series_gives_same_code_for_same_level() {
    let a = IntImage::new(2, 1, Layout::Gray, 14, vec![100, 9000]).unwrap();
    let b = IntImage::new(2, 1, Layout::Gray, 14, vec![9000, 16383]).unwrap();
    let out = lil_convert(&[a, b], GroupMode::Joint, Scope::Series, None).unwrap();
    assert_eq!(out.images[0].data, vec![0, 128]);
    assert_eq!(out.images[1].data, vec![128, 255]);
    assert_eq!(out.level_sets.len(), 1);
    assert_eq!(out.level_sets[0].counts(), vec![3]);
}
