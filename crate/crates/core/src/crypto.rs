//! Touchlink key transport and network-layer AES-CCM*.
//!
//! The transport key of a touchlink transaction is the AES-128 encryption,
//! under the light-link master key, of a block built from the transaction
//! and response identifiers. The network key travels encrypted (AES-ECB)
//! under that transport key.

use std::fmt;
use std::str::FromStr;

use aes::cipher::{BlockDecrypt, BlockEncrypt, KeyInit};
use aes::Aes128;
use ccm::aead::AeadInPlace;
use ccm::consts::{U13, U4};
use ccm::Ccm;
use rand::RngCore;
use thiserror::Error;

use crate::airsim::SimTime;

type NwkCcm = Ccm<Aes128, U4, U13>;

/// Security level byte mixed into every network nonce (ENC-MIC-32).
pub const SECURITY_LEVEL: u8 = 0x05;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("transaction identifier must be nonzero")]
    ZeroTransactionId,
    #[error("message integrity check failed")]
    IntegrityFailure,
    #[error("invalid key: {0}")]
    InvalidKey(String),
}

/// A 128-bit AES key. Master, transport and network keys are roles, not types.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Default)]
pub struct Key128(pub [u8; 16]);

impl Key128 {
    pub const ZERO: Key128 = Key128([0; 16]);

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut k = [0u8; 16];
        rng.fill_bytes(&mut k);
        Key128(k)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Key128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Key128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key128({})", self.to_hex())
    }
}

impl FromStr for Key128 {
    type Err = CryptoError;

    /// Parses exactly 32 hex characters.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 32 {
            return Err(CryptoError::InvalidKey(format!(
                "expected 32 hex characters, got {}",
                s.len()
            )));
        }
        let mut k = [0u8; 16];
        hex::decode_to_slice(s, &mut k).map_err(|e| CryptoError::InvalidKey(e.to_string()))?;
        Ok(Key128(k))
    }
}

/// Identifiers binding one touchlink exchange, plus its expiry.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct TransactionContext {
    pub transaction_id: u32,
    pub response_id: u32,
    pub expires_at: SimTime,
}

impl TransactionContext {
    pub fn new(
        transaction_id: u32,
        response_id: u32,
        expires_at: SimTime,
    ) -> Result<Self, CryptoError> {
        if transaction_id == 0 {
            return Err(CryptoError::ZeroTransactionId);
        }
        Ok(TransactionContext {
            transaction_id,
            response_id,
            expires_at,
        })
    }

    pub fn is_live(&self, now: SimTime) -> bool {
        now <= self.expires_at
    }
}

/// Expands the identifier pair to a 16-byte plaintext block:
/// transaction ‖ transaction ‖ response ‖ response, each word big-endian.
pub fn expand_ids(transaction_id: u32, response_id: u32) -> Result<[u8; 16], CryptoError> {
    if transaction_id == 0 {
        return Err(CryptoError::ZeroTransactionId);
    }
    let mut block = [0u8; 16];
    block[0..4].copy_from_slice(&transaction_id.to_be_bytes());
    block[4..8].copy_from_slice(&transaction_id.to_be_bytes());
    block[8..12].copy_from_slice(&response_id.to_be_bytes());
    block[12..16].copy_from_slice(&response_id.to_be_bytes());
    Ok(block)
}

fn ecb_encrypt(key: &Key128, block: [u8; 16]) -> [u8; 16] {
    let cipher = Aes128::new(&key.0.into());
    let mut b = block.into();
    cipher.encrypt_block(&mut b);
    b.into()
}

fn ecb_decrypt(key: &Key128, block: [u8; 16]) -> [u8; 16] {
    let cipher = Aes128::new(&key.0.into());
    let mut b = block.into();
    cipher.decrypt_block(&mut b);
    b.into()
}

pub fn derive_transport_key(
    master: &Key128,
    ctx: &TransactionContext,
) -> Result<Key128, CryptoError> {
    let block = expand_ids(ctx.transaction_id, ctx.response_id)?;
    Ok(Key128(ecb_encrypt(master, block)))
}

pub fn wrap_network_key(
    master: &Key128,
    ctx: &TransactionContext,
    network_key: &Key128,
) -> Result<[u8; 16], CryptoError> {
    let transport = derive_transport_key(master, ctx)?;
    Ok(ecb_encrypt(&transport, network_key.0))
}

pub fn unwrap_network_key(
    master: &Key128,
    ctx: &TransactionContext,
    ciphertext: &[u8; 16],
) -> Result<Key128, CryptoError> {
    let transport = derive_transport_key(master, ctx)?;
    Ok(Key128(ecb_decrypt(&transport, *ciphertext)))
}

/// 13-byte CCM nonce: source short address and frame counter (big-endian),
/// the security level byte, then zero padding.
pub fn nwk_nonce(src_short: u16, frame_counter: u32) -> [u8; 13] {
    let mut nonce = [0u8; 13];
    nonce[0..2].copy_from_slice(&src_short.to_be_bytes());
    nonce[2..6].copy_from_slice(&frame_counter.to_be_bytes());
    nonce[6] = SECURITY_LEVEL;
    nonce
}

/// Encrypts and authenticates a network payload. The MIC is the 4-byte CCM
/// tag read as a little-endian word, so its wire bytes equal the tag bytes.
pub fn ccm_encrypt(
    network_key: &Key128,
    src_short: u16,
    frame_counter: u32,
    payload: &[u8],
) -> (Vec<u8>, u32) {
    let cipher = NwkCcm::new(&network_key.0.into());
    let nonce = nwk_nonce(src_short, frame_counter);
    let mut buf = payload.to_vec();
    let tag = cipher
        .encrypt_in_place_detached(&nonce.into(), &[], &mut buf)
        .expect("payload length fits the CCM length field");
    let mic = u32::from_le_bytes(tag.into());
    (buf, mic)
}

pub fn ccm_decrypt(
    network_key: &Key128,
    src_short: u16,
    frame_counter: u32,
    ciphertext: &[u8],
    mic: u32,
) -> Result<Vec<u8>, CryptoError> {
    let cipher = NwkCcm::new(&network_key.0.into());
    let nonce = nwk_nonce(src_short, frame_counter);
    let mut buf = ciphertext.to_vec();
    cipher
        .decrypt_in_place_detached(&nonce.into(), &[], &mut buf, &mic.to_le_bytes().into())
        .map_err(|_| CryptoError::IntegrityFailure)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(t: u32, r: u32) -> TransactionContext {
        TransactionContext::new(t, r, 1).unwrap()
    }

    #[test]
    fn expansion_layout() {
        assert_eq!(
            hex::encode(expand_ids(1, 2).unwrap()),
            "00000001000000010000000200000002"
        );
        assert_eq!(
            hex::encode(expand_ids(0xDEADBEEF, 0xCAFEBABE).unwrap()),
            "deadbeefdeadbeefcafebabecafebabe"
        );
        assert_eq!(expand_ids(0, 5), Err(CryptoError::ZeroTransactionId));
    }

    #[test]
    fn zero_transaction_is_rejected() {
        assert_eq!(
            TransactionContext::new(0, 1, 1),
            Err(CryptoError::ZeroTransactionId)
        );
        let bad = TransactionContext {
            transaction_id: 0,
            response_id: 1,
            expires_at: 1,
        };
        assert_eq!(
            derive_transport_key(&Key128::ZERO, &bad),
            Err(CryptoError::ZeroTransactionId)
        );
    }

    #[test]
    fn transport_key_is_deterministic_and_response_sensitive() {
        let a = derive_transport_key(&Key128::ZERO, &ctx(1, 2)).unwrap();
        let b = derive_transport_key(&Key128::ZERO, &ctx(1, 2)).unwrap();
        let c = derive_transport_key(&Key128::ZERO, &ctx(1, 3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn wrap_unwrap_round_trip() {
        let master: Key128 = "000102030405060708090a0b0c0d0e0f".parse().unwrap();
        let nk: Key128 = "ffeeddccbbaa99887766554433221100".parse().unwrap();
        let c = ctx(0x1234, 0x5678);
        let wrapped = wrap_network_key(&master, &c, &nk).unwrap();
        assert_ne!(wrapped, nk.0);
        assert_eq!(unwrap_network_key(&master, &c, &wrapped).unwrap(), nk);
    }

    #[test]
    fn key_hex_parsing() {
        assert!("00".parse::<Key128>().is_err());
        assert!("zz0102030405060708090a0b0c0d0e0f"
            .parse::<Key128>()
            .is_err());
        let k: Key128 = "000102030405060708090A0B0C0D0E0F".parse().unwrap();
        assert_eq!(k.to_string(), "000102030405060708090a0b0c0d0e0f");
    }

    #[test]
    fn ccm_round_trip_and_empty_payload() {
        let k = Key128([7; 16]);
        let (ct, mic) = ccm_encrypt(&k, 0x0001, 9, b"\x01");
        assert_eq!(ccm_decrypt(&k, 0x0001, 9, &ct, mic).unwrap(), b"\x01");

        let (ct, mic) = ccm_encrypt(&k, 0x0001, 10, &[]);
        assert!(ct.is_empty());
        assert!(ccm_decrypt(&k, 0x0001, 10, &ct, mic).unwrap().is_empty());
        assert_eq!(
            ccm_decrypt(&k, 0x0001, 10, &ct, mic ^ 1),
            Err(CryptoError::IntegrityFailure)
        );
    }

    #[test]
    fn ccm_binds_nonce_inputs() {
        let k = Key128([7; 16]);
        let (ct, mic) = ccm_encrypt(&k, 0x0001, 9, b"\x04\x80");
        assert!(ccm_decrypt(&k, 0x0002, 9, &ct, mic).is_err());
        assert!(ccm_decrypt(&k, 0x0001, 10, &ct, mic).is_err());
        assert!(ccm_decrypt(&Key128([8; 16]), 0x0001, 9, &ct, mic).is_err());
    }
}
