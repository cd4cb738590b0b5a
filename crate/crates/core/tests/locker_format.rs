use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weightlock::cipher::{expand_keystream, lock_bytes, MasterKey};
use weightlock::locker::{
    load_locked, locked_from_bytes, locked_to_bytes, read_locked, read_model, save_locked,
    write_locked, write_model,
};
use weightlock::nn::{build_model, presets, ArchitectureDescriptor, Model, ParamSource};
use weightlock::{lock_model, unlock_model, Error};

fn tiny_arch() -> ArchitectureDescriptor {
    "input 1x6x6\nconv 2 3x3 stride 1 pad valid relu\nmaxpool 2x2 stride 2\nflatten\ndense 3 linear\n"
        .parse()
        .unwrap()
}

fn bits(view: &impl ParamSource) -> Vec<u32> {
    view.tensors()
        .iter()
        .flat_map(|t| t.values.iter().map(|v| v.to_bits()))
        .collect()
}

fn model_bits(m: &Model) -> Vec<u32> {
    m.params()
        .iter()
        .flat_map(|t| t.values.iter().map(|v| v.to_bits()))
        .collect()
}

/// Replaces a spread of values with NaN payloads, infinities, signed zeros
/// and subnormals.
fn with_special_values(mut m: Model) -> Model {
    let specials = [
        f32::NAN,
        f32::from_bits(0x7fc0_1234),
        f32::from_bits(0xffbf_ffff),
        f32::INFINITY,
        f32::NEG_INFINITY,
        -0.0,
        f32::from_bits(1),
        f32::MAX,
    ];
    for t in m.params_mut() {
        for (i, v) in t.values.iter_mut().enumerate() {
            if i % 3 == 0 {
                *v = specials[(i / 3) % specials.len()];
            }
        }
    }
    m
}

#[test]
fn round_trip_through_bytes_is_bit_exact() {
    let key = MasterKey::from_hex("000102030405060708090a0b0c0d0e0f").unwrap();
    for model in [
        build_model(&presets::mnist(), 3),
        with_special_values(build_model(&tiny_arch(), 4)),
    ] {
        let locked = lock_model(&model, &key).unwrap();
        let mut buf = Vec::new();
        write_locked(&locked, &mut buf).unwrap();
        let back = read_locked(buf.as_slice()).unwrap();
        assert_eq!(back, locked);
        let view = unlock_model(&back, &key).unwrap();
        assert_eq!(bits(&view), model_bits(&model));
    }
}

#[test]
fn files_on_disk_round_trip() {
    let dir = std::env::temp_dir().join(format!("weightlock-locker-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("tiny.dlk");
    let key = MasterKey::new([9; 16]);
    let model = build_model(&tiny_arch(), 1);
    let locked = lock_model(&model, &key).unwrap();
    save_locked(&locked, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"DLK1");
    let back = load_locked(&path).unwrap();
    assert_eq!(
        bits(&unlock_model(&back, &key).unwrap()),
        model_bits(&model)
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn plaintext_checkpoint_round_trip() {
    let model = with_special_values(build_model(&tiny_arch(), 2));
    let mut buf = Vec::new();
    write_model(&model, &mut buf).unwrap();
    assert_eq!(&buf[..4], b"DLM1");
    assert_eq!(
        model_bits(&read_model(buf.as_slice()).unwrap()),
        model_bits(&model)
    );
}

#[test]
fn locking_is_deterministic() {
    let model = build_model(&tiny_arch(), 5);
    let key = MasterKey::new([1; 16]);
    let a = locked_to_bytes(&lock_model(&model, &key).unwrap()).unwrap();
    let b = locked_to_bytes(&lock_model(&model, &key).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn keystream_runs_across_tensors_in_order() {
    let model = build_model(&tiny_arch(), 6);
    let key = MasterKey::new([0x5a; 16]);
    let plain: Vec<u8> = model
        .params()
        .iter()
        .flat_map(|t| t.values.iter().flat_map(|v| v.to_le_bytes()))
        .collect();
    let expected = lock_bytes(&plain, &expand_keystream(&key, plain.len())).unwrap();
    let locked = lock_model(&model, &key).unwrap();
    let blobs: Vec<u8> = locked
        .tensors()
        .iter()
        .flat_map(|t| t.blob.iter().copied())
        .collect();
    assert_eq!(blobs, expected);
    assert_eq!(locked.param_count(), model.param_count());
    assert_eq!(locked.blob_len(), 4 * model.param_count());
}

#[test]
fn wrong_key_bytes_match_at_chance_rate() {
    let arch: ArchitectureDescriptor =
        "input 1x12x12\nconv 8 3x3 stride 1 pad valid relu\nflatten\ndense 5 linear\n"
            .parse()
            .unwrap();
    let model = build_model(&arch, 7);
    let plain: Vec<u8> = model
        .params()
        .iter()
        .flat_map(|t| t.values.iter().flat_map(|v| v.to_le_bytes()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut same, mut total) = (0usize, 0usize);
    for _ in 0..100 {
        let right = MasterKey::new(rng.gen());
        let wrong = MasterKey::new(rng.gen());
        let locked = lock_model(&model, &right).unwrap();
        let view = unlock_model(&locked, &wrong).unwrap();
        let got: Vec<u8> = view
            .tensors()
            .iter()
            .flat_map(|t| t.values.iter().flat_map(|v| v.to_le_bytes()))
            .collect();
        same += got.iter().zip(&plain).filter(|(a, b)| a == b).count();
        total += plain.len();
    }
    let rate = same as f64 / total as f64;
    assert!(
        (rate - 1.0 / 256.0).abs() < 5e-4,
        "matching byte rate {rate} over {total} bytes"
    );
}

#[test]
fn wrong_key_is_not_an_error() {
    let model = build_model(&tiny_arch(), 9);
    let locked = lock_model(&model, &MasterKey::new([1; 16])).unwrap();
    let view = unlock_model(&locked, &MasterKey::new([2; 16])).unwrap();
    assert_eq!(view.param_count(), model.param_count());
    assert_ne!(bits(&view), model_bits(&model));
}

fn sample_file() -> Vec<u8> {
    let model = build_model(&tiny_arch(), 10);
    locked_to_bytes(&lock_model(&model, &MasterKey::new([3; 16])).unwrap()).unwrap()
}

#[test]
fn corrupted_magic_is_named() {
    let mut bytes = sample_file();
    bytes[0] = b'X';
    assert!(matches!(
        locked_from_bytes(&bytes),
        Err(Error::BadMagic { .. })
    ));

    let mut plain = Vec::new();
    write_model(&build_model(&tiny_arch(), 0), &mut plain).unwrap();
    assert!(matches!(
        locked_from_bytes(&plain),
        Err(Error::BadMagic { .. })
    ));
}

#[test]
fn unsupported_version_is_named() {
    let mut bytes = sample_file();
    bytes[4] = 9;
    assert!(matches!(
        locked_from_bytes(&bytes),
        Err(Error::UnsupportedVersion(9))
    ));
}

#[test]
fn every_truncation_is_detected() {
    let bytes = sample_file();
    for len in 0..bytes.len() {
        match locked_from_bytes(&bytes[..len]) {
            Err(Error::Truncated) => {}
            other => panic!("prefix of {len} bytes gave {other:?}"),
        }
    }
}

#[test]
fn trailing_bytes_are_rejected() {
    let mut bytes = sample_file();
    bytes.push(0);
    assert!(matches!(
        locked_from_bytes(&bytes),
        Err(Error::MalformedFile(_))
    ));
}

#[test]
fn any_flipped_payload_bit_breaks_the_digest() {
    let bytes = sample_file();
    let blob_start = bytes.len() - 32 - 4 * build_model(&tiny_arch(), 0).param_count();
    for i in (blob_start..bytes.len()).step_by(7) {
        let mut bad = bytes.clone();
        bad[i] ^= 0x10;
        assert!(
            matches!(locked_from_bytes(&bad), Err(Error::DigestMismatch)),
            "flip at byte {i}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn corruption_never_yields_a_different_model(pos in any::<prop::sample::Index>(), mask in 1u8..=255) {
        let bytes = sample_file();
        let mut bad = bytes.clone();
        bad[pos.index(bytes.len())] ^= mask;
        prop_assert!(locked_from_bytes(&bad).is_err());
    }
}
