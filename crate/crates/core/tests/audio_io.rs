use std::f64::consts::PI;

use proptest::prelude::*;
use vqspk::audio::{decode_wav, encode_wav};
use vqspk::{peak_normalize, read_wav, write_wav, AudioClip};

/// Minimal RIFF builder, written independently of the crate's encoder.
fn riff(channels: u16, bits: u16, rate: u32, data: &[u8]) -> Vec<u8> {
    let block = channels * bits / 8;
    let mut fmt = Vec::new();
    fmt.extend_from_slice(&1u16.to_le_bytes());
    fmt.extend_from_slice(&channels.to_le_bytes());
    fmt.extend_from_slice(&rate.to_le_bytes());
    fmt.extend_from_slice(&(rate * block as u32).to_le_bytes());
    fmt.extend_from_slice(&block.to_le_bytes());
    fmt.extend_from_slice(&bits.to_le_bytes());
    let mut body = b"WAVE".to_vec();
    for (id, chunk) in [(b"fmt ", &fmt[..]), (b"data", data)] {
        body.extend_from_slice(id);
        body.extend_from_slice(&(chunk.len() as u32).to_le_bytes());
        body.extend_from_slice(chunk);
        if chunk.len() % 2 == 1 {
            body.push(0);
        }
    }
    let mut out = b"RIFF".to_vec();
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend(body);
    out
}

#[test]
fn tone_file_survives_a_second_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fs = 16000;
    let pcm: Vec<u8> = (0..fs)
        .flat_map(|i| {
            let s = 0.8 * (2.0 * PI * 440.0 * i as f64 / fs as f64).sin();
            ((s * 32767.0).round() as i16).to_le_bytes()
        })
        .collect();
    let first = dir.path().join("tone.wav");
    std::fs::write(&first, riff(1, 16, fs, &pcm)).unwrap();

    let clip = read_wav(&first).unwrap();
    assert_eq!(clip.len(), fs as usize);
    let second = dir.path().join("again.wav");
    write_wav(&clip, &second).unwrap();
    let back = read_wav(&second).unwrap();
    assert_eq!(back.sample_rate_hz(), fs);
    for (a, b) in clip.samples().iter().zip(back.samples()) {
        assert!((a - b).abs() <= 1.0 / 32768.0, "{a} vs {b}");
    }
}

#[test]
fn stereo_file_is_averaged() {
    let data: Vec<u8> = [1000i16, 3000, -200, -400]
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    let clip = decode_wav(&riff(2, 16, 8000, &data)).unwrap();
    assert_eq!(clip.samples(), &[2000.0 / 32768.0, -300.0 / 32768.0]);
}

proptest! {
    #[test]
    fn decoded_samples_stay_in_range(
        pcm in prop::collection::vec(any::<i16>(), 1..400),
        stereo in any::<bool>(),
    ) {
        let data: Vec<u8> = pcm.iter().flat_map(|v| v.to_le_bytes()).collect();
        let clip = decode_wav(&riff(if stereo { 2 } else { 1 }, 16, 11025, &data)).unwrap();
        prop_assert!(clip.samples().iter().all(|s| (-1.0..=1.0).contains(s)));
    }

    #[test]
    fn decoded_8bit_samples_stay_in_range(pcm in prop::collection::vec(any::<u8>(), 1..400)) {
        let clip = decode_wav(&riff(1, 8, 8000, &pcm)).unwrap();
        for (s, &b) in clip.samples().iter().zip(&pcm) {
            prop_assert!((-1.0..=1.0).contains(s));
            prop_assert_eq!(*s, (b as f64 - 128.0) / 128.0);
        }
    }

    #[test]
    fn round_trip_of_decoded_audio_is_within_one_step(pcm in prop::collection::vec(any::<i16>(), 1..400)) {
        let data: Vec<u8> = pcm.iter().flat_map(|v| v.to_le_bytes()).collect();
        let clip = decode_wav(&riff(1, 16, 22050, &data)).unwrap();
        let back = decode_wav(&encode_wav(&clip)).unwrap();
        for (a, b) in clip.samples().iter().zip(back.samples()) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn peak_normalize_is_idempotent(samples in prop::collection::vec(-1.0f64..=1.0, 1..300)) {
        let clip = AudioClip::new(samples, 8000).unwrap();
        let once = peak_normalize(&clip);
        let twice = peak_normalize(&once);
        prop_assert_eq!(once.samples(), twice.samples());
    }
}
