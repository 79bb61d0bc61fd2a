mod common;

use std::f64::consts::PI;

use common::{alpha_scenario, render_default, OCCIPITAL};
use pieeg_core::dsp::{band_power, welch_psd, WelchParams};
use pieeg_core::protocol::{decode_frame, lsb_microvolts, reg, Command, RegisterFile};
use pieeg_core::simulator::{
    render, AlphaInterval, BlinkEvent, Contact, ContactChange, Scenario, SignalModel, SimDevice,
};

fn streaming(scenario: Scenario) -> SimDevice {
    let mut dev = SimDevice::new(scenario).unwrap();
    dev.send_command(&Command::Reset).unwrap();
    dev
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

#[test]
fn silent_scenario_gives_zero_words() {
    let mut dev = streaming(Scenario::silent(2.0));
    dev.send_command(&Command::Rdatac).unwrap();
    for f in dev.step(500).unwrap() {
        assert_eq!(decode_frame(&f).unwrap().channels, [0; 8]);
    }
}

#[test]
fn noise_only_rms_matches_internal_noise() {
    let block = render_default(&Scenario::noise_only(10.0, 3));
    for ch in &block.data {
        let r = rms(ch);
        assert!((r - 0.4).abs() <= 0.04, "rms {r}");
    }
}

#[test]
fn noise_psd_integrates_to_noise_power() {
    let block = render_default(&Scenario::noise_only(60.0, 9));
    let spec = welch_psd(&block, WelchParams::default()).unwrap();
    for psd in &spec.psd {
        let total: f64 = psd.iter().sum::<f64>() * spec.resolution;
        assert!((total - 0.16).abs() / 0.16 <= 0.15, "{total}");
    }
}

#[test]
fn fixed_seed_is_byte_identical() {
    let mut s = common::blink_scenario(4, 3, 12.0);
    s.chew_episodes = common::chew_scenario(4, 2.0, 6.0, 12.0).chew_episodes;
    let run = || {
        let mut dev = streaming(s.clone());
        dev.send_command(&Command::Rdatac).unwrap();
        dev.step(3000).unwrap()
    };
    assert_eq!(run(), run());
    let mut other = s.clone();
    other.seed += 1;
    let mut dev = streaming(other);
    dev.send_command(&Command::Rdatac).unwrap();
    assert_ne!(dev.step(3000).unwrap(), run());
}

#[test]
fn frame_count_tracks_sample_rate() {
    for sps in [250u32, 1000, 16000] {
        let regs = RegisterFile {
            sample_rate: sps,
            ..RegisterFile::default()
        };
        let block = render(&Scenario::noise_only(10.0, 1), &regs).unwrap();
        assert_eq!(block.len(), sps as usize * 10);
    }
}

#[test]
fn alpha_only_spectrum_is_concentrated() {
    let mut s = alpha_scenario(2, 0.0, 20.0, 20.0);
    s.background_noise_uv_rms = 0.0;
    s.environment_noise_uv_rms = 0.0;
    let block = render_default(&s);
    let spec = welch_psd(&block, WelchParams::default()).unwrap();
    let alpha = band_power(&spec, 8.0, 12.0).unwrap();
    let beta = band_power(&spec, 15.0, 30.0).unwrap();
    for ch in OCCIPITAL {
        assert!(
            alpha[ch] >= 100.0 * beta[ch],
            "{} vs {}",
            alpha[ch],
            beta[ch]
        );
    }
}

#[test]
fn quantized_sine_within_half_lsb() {
    let mut s = Scenario::silent(4.0);
    s.alpha_intervals.push(AlphaInterval {
        t_start: 0.0,
        t_end: 4.0,
        amplitude_uv: 20.0,
        frequency_hz: 10.0,
        channels: (0..8).collect(),
    });
    for gain in [1u32, 8, 24] {
        let regs = RegisterFile {
            channel_gain: [gain; 8],
            ..RegisterFile::default()
        };
        let block = render(&s, &regs).unwrap();
        let half = lsb_microvolts(gain, 4.5).unwrap() / 2.0;
        for ch in &block.data {
            for (n, v) in ch.iter().enumerate() {
                let truth = 20.0 * (2.0 * PI * 10.0 * n as f64 / 250.0).sin();
                assert!(
                    (v - truth).abs() <= half * (1.0 + 1e-9),
                    "gain {gain} n {n}"
                );
            }
        }
    }
}

#[test]
fn blink_peaks_at_amplitude() {
    let mut s = Scenario::silent(4.0);
    s.blink_events.push(BlinkEvent {
        t_center: 2.0,
        duration_s: 0.3,
        amplitude_uv: 150.0,
        channels: vec![0, 1],
    });
    let mut m = SignalModel::new(&s, 250.0).unwrap();
    assert!((m.synth_sample(2.0, 0).unwrap() - 150.0).abs() < 1e-9);
    assert_eq!(m.synth_sample(2.0, 5).unwrap(), 0.0);
    assert!(m.synth_sample(5.0, 0).is_err());
}

#[test]
fn lead_off_toggle_visible_within_one_second() {
    let mut s = Scenario::noise_only(10.0, 0);
    s.contact_changes.push(ContactChange {
        t: 4.0,
        channel: 3,
        state: Contact::Disconnected,
    });
    let mut dev = streaming(s);
    dev.send_command(&Command::Wreg {
        addr: reg::CONFIG4,
        values: vec![0x02],
    })
    .unwrap();
    assert_eq!(dev.lead_off_status().unwrap(), [false; 8]);
    dev.send_command(&Command::Rdatac).unwrap();
    let frames = dev.step(2500).unwrap();
    let first_fault = frames
        .iter()
        .position(|f| decode_frame(f).unwrap().lead_off_p()[3])
        .unwrap();
    let t = first_fault as f64 / 250.0;
    assert!((4.0..=5.0).contains(&t), "{t}");
    let status = dev.lead_off_status().unwrap();
    assert_eq!(
        status,
        [false, false, false, true, false, false, false, false]
    );
    // the disconnected electrode saturates the converter
    let last = decode_frame(frames.last().unwrap()).unwrap();
    assert_eq!(last.channels[3], 8_388_607);
}

#[test]
fn rate_change_keeps_device_time_continuous() {
    let mut dev = streaming(Scenario::noise_only(30.0, 0));
    dev.send_command(&Command::Rdatac).unwrap();
    dev.step(500).unwrap();
    dev.send_command(&Command::Sdatac).unwrap();
    // CONFIG1 code 4 selects 1000 SPS
    dev.send_command(&Command::Wreg {
        addr: reg::CONFIG1,
        values: vec![0x94],
    })
    .unwrap();
    assert_eq!(dev.registers().sample_rate, 1000);
    assert!((dev.time() - 2.0).abs() < 1e-12);
    dev.send_command(&Command::Rdatac).unwrap();
    dev.step(1000).unwrap();
    assert!((dev.time() - 3.0).abs() < 1e-12);
}

#[test]
fn scenario_file_roundtrip() {
    let s = common::chew_scenario(1, 3.0, 8.0, 12.0);
    let back = Scenario::from_toml(&s.to_toml()).unwrap();
    assert_eq!(s, back);
    assert!(Scenario::from_toml("duration = 5.0\nseed = 1\nbogus = 2\n").is_err());
}
