"""Walk through the signal front end: synthesis, spectral features, labels.

Generates a parallel air/bone-conduction speech pair, measures how strongly
the bone-conduction channel attenuates high frequencies, then runs the
log-Mel front end and the energy-threshold labeler on the air signal.

Run:  python demos/01_signals_and_features.py
"""

import numpy as np

from bcvad import (
    BC_FEATURES,
    SynthProfile,
    compute_log_mel,
    generate_labels,
    rms_dbfs,
    smooth_labels,
    stft_magnitude,
    synth_speech_pair,
)

profile = SynthProfile(kind="target_speech", pitch_range=(110.0, 190.0),
                       pause_density=0.45, seed=42)
air, bc = synth_speech_pair(10.0, profile)
print(f"generated {air.duration_s:.0f} s of parallel speech")
print(f"  air level: {rms_dbfs(air):6.1f} dBFS")
print(f"  bc  level: {rms_dbfs(bc):6.1f} dBFS")

spectrum_air = np.abs(np.fft.rfft(air.samples)) ** 2
spectrum_bc = np.abs(np.fft.rfft(bc.samples)) ** 2
freqs = np.fft.rfftfreq(len(air), d=1.0 / air.sample_rate)
high = freqs > 2000.0
ratio = 10 * np.log10(spectrum_bc[high].sum() / spectrum_air[high].sum())
print(f"  bc energy above 2 kHz relative to air: {ratio:.1f} dB")

features = compute_log_mel(bc, BC_FEATURES)
print(f"\nbone-conduction log-Mel features: {features.frames.shape[0]} frames "
      f"x {features.frames.shape[1]} bins (10 ms hop)")
print(f"  value range: [{features.frames.min():.2f}, {features.frames.max():.2f}] (ln scale)")

labels = generate_labels(stft_magnitude(air, BC_FEATURES.spectrogram))
soft = smooth_labels(labels)
print(f"\nlabels from the clean air channel: {labels.speech_fraction:.1%} speech frames")

# a coarse timeline: one character per 200 ms, # marks speech
chars = []
for i in range(0, len(labels), 20):
    chars.append("#" if labels.values[i : i + 20].mean() > 0.5 else ".")
print("  timeline: " + "".join(chars))
print(f"  smoothed targets stay in [{soft.values.min():.2f}, {soft.values.max():.2f}]")
