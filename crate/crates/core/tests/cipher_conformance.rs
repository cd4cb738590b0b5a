mod common;

use common::{hex, reference_sbox, FIPS197_A1_EXPANSION};
use proptest::prelude::*;
use weightlock::cipher::{
    aes128_expand, expand_keystream, lock_bytes, sbox_forward, sbox_inverse, unlock_bytes,
    Keystream, MasterKey, INV_SBOX, SBOX,
};
use weightlock::Error;

const FIPS_KEY: &str = "2b7e151628aed2a6abf7158809cf4f3c";

#[test]
fn fips197_key_expansion() {
    let key = MasterKey::from_hex(FIPS_KEY).unwrap();
    assert_eq!(
        aes128_expand(key.as_bytes()).to_vec(),
        hex(FIPS197_A1_EXPANSION)
    );
    assert_eq!(
        expand_keystream(&key, 176).as_bytes(),
        &hex(FIPS197_A1_EXPANSION)[..]
    );
}

#[test]
fn sbox_matches_field_definition() {
    let reference = reference_sbox();
    assert_eq!(SBOX, reference);
    for b in 0..=255u8 {
        assert_eq!(sbox_forward(b), reference[b as usize]);
        assert_eq!(reference[INV_SBOX[b as usize] as usize], b);
    }
}

#[test]
fn sbox_is_a_bijection() {
    let mut seen = [false; 256];
    for b in 0..=255u8 {
        let s = sbox_forward(b);
        assert!(!seen[s as usize], "duplicate image {s:#04x}");
        seen[s as usize] = true;
        assert_eq!(sbox_inverse(s), b);
    }
}

#[test]
fn single_byte_vectors() {
    let ks = Keystream::from(vec![0x00, 0x01, 0xff]);
    assert_eq!(
        lock_bytes(&[0x00, 0x00, 0x00], &ks).unwrap(),
        vec![0x63, 0x7c, 0x16]
    );
    assert_eq!(
        unlock_bytes(&[0x63, 0x7c, 0x16], &ks).unwrap(),
        vec![0x00, 0x00, 0x00]
    );
}

#[test]
fn second_block_chains_from_last_round_key() {
    let key = MasterKey::from_hex(FIPS_KEY).unwrap();
    let ks = expand_keystream(&key, 352);
    let bytes = ks.as_bytes();
    assert_eq!(
        &bytes[176..192],
        &hex("d014f9a8c9ee2589e13f0cc8b6630ca6")[..]
    );
    assert_eq!(
        &bytes[192..208],
        &hex("2aeadde6e304f86f023bf4a7b458f801")[..]
    );
}

#[test]
fn keystream_lengths_are_exact() {
    let key = MasterKey::new([7; 16]);
    for n in [0, 1, 175, 176, 177, 1000] {
        assert_eq!(expand_keystream(&key, n).len(), n);
    }
}

#[test]
fn short_keystream_is_rejected() {
    let ks = Keystream::from(vec![0u8; 3]);
    assert!(matches!(
        lock_bytes(&[1, 2, 3, 4], &ks),
        Err(Error::KeystreamTooShort {
            needed: 4,
            available: 3
        })
    ));
}

#[test]
fn bad_key_material() {
    assert!(MasterKey::from_hex("00").is_err());
    assert!(MasterKey::from_hex(&"g".repeat(32)).is_err());
    assert!(MasterKey::from_slice(&[0; 15]).is_err());
    assert!(format!("{:?}", MasterKey::new([0xab; 16]))
        .find("ab")
        .is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn lock_unlock_round_trip(key in any::<[u8; 16]>(), data in prop::collection::vec(any::<u8>(), 0..600)) {
        let ks = expand_keystream(&MasterKey::new(key), data.len());
        let locked = lock_bytes(&data, &ks).unwrap();
        prop_assert_eq!(unlock_bytes(&locked, &ks).unwrap(), data);
    }
}

proptest! {
    #[test]
    fn keystream_is_prefix_stable(key in any::<[u8; 16]>(), a in 0usize..600, b in 0usize..600) {
        let key = MasterKey::new(key);
        let (short, long) = (a.min(b), a.max(b));
        let s = expand_keystream(&key, short);
        let l = expand_keystream(&key, long);
        prop_assert_eq!(s.as_bytes(), &l.as_bytes()[..short]);
    }
}
