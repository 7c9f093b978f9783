use crate::error::{Error, Result};

/// Solar irradiance at 1 AU with the full solar disk visible, W/m².
pub const SOLAR_CONSTANT: f64 = 1367.0;

/// Time series of per-cell visible solar-disk fractions.
///
/// Each frame holds from its timestamp until the next one; the last frame
/// holds for one frame spacing, which closes the coverage interval.
#[derive(Debug, Clone)]
pub struct IlluminationSeries {
    width: usize,
    height: usize,
    timestamps: Vec<f64>,
    spacing: f64,
    /// Frame-major fractions, `frames[f * cells + i]`.
    frames: Vec<f64>,
    /// Cell-major cumulative visible-seconds, `(frames + 1)` entries per cell.
    cumulative: Vec<f64>,
}

impl IlluminationSeries {
    /// `frames` is frame-major: all cells of frame 0, then frame 1, ...
    pub fn new(width: usize, height: usize, timestamps: Vec<f64>, frames: Vec<f64>) -> Result<Self> {
        let cells = width * height;
        if timestamps.len() < 2 {
            return Err(Error::InvalidScenario(
                "illumination needs at least two timestamps".into(),
            ));
        }
        if frames.len() != cells * timestamps.len() {
            return Err(Error::DimensionMismatch(format!(
                "illumination holds {} values, expected {} frames of {width}x{height}",
                frames.len(),
                timestamps.len()
            )));
        }
        let spacing = timestamps[1] - timestamps[0];
        for (i, pair) in timestamps.windows(2).enumerate() {
            let dt = pair[1] - pair[0];
            if !(dt > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "timestamps not strictly increasing at index {}",
                    i + 1
                )));
            }
            if (dt - spacing).abs() > 1e-6 * spacing {
                return Err(Error::InvalidScenario(format!(
                    "non-uniform frame spacing at index {}: {dt} s vs {spacing} s",
                    i + 1
                )));
            }
        }
        for (k, &v) in frames.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::FrameRange {
                    frame: k / cells,
                    cell: k % cells,
                    value: v,
                });
            }
        }
        let n = timestamps.len();
        let mut cumulative = vec![0.0; cells * (n + 1)];
        for cell in 0..cells {
            let row = &mut cumulative[cell * (n + 1)..(cell + 1) * (n + 1)];
            for f in 0..n {
                row[f + 1] = row[f] + frames[f * cells + cell] * spacing;
            }
        }
        Ok(IlluminationSeries {
            width,
            height,
            timestamps,
            spacing,
            frames,
            cumulative,
        })
    }

    /// Uniform fraction everywhere, `n_frames` frames spaced `spacing` apart.
    pub fn constant(
        width: usize,
        height: usize,
        start: f64,
        spacing: f64,
        n_frames: usize,
        fraction: f64,
    ) -> Result<Self> {
        IlluminationSeries::from_fn(width, height, start, spacing, n_frames, |_, _| fraction)
    }

    /// Builds frames from `f(cell_index, frame_index)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        start: f64,
        spacing: f64,
        n_frames: usize,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let timestamps: Vec<f64> = (0..n_frames).map(|i| start + spacing * i as f64).collect();
        let cells = width * height;
        let mut frames = Vec::with_capacity(cells * n_frames);
        for fr in 0..n_frames {
            for c in 0..cells {
                frames.push(f(c, fr));
            }
        }
        IlluminationSeries::new(width, height, timestamps, frames)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn n_frames(&self) -> usize {
        self.timestamps.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn frames(&self) -> &[f64] {
        &self.frames
    }

    pub fn coverage(&self) -> (f64, f64) {
        (
            self.timestamps[0],
            self.timestamps[self.timestamps.len() - 1] + self.spacing,
        )
    }

    pub fn frame_index(&self, t: f64) -> usize {
        let raw = ((t - self.timestamps[0]) / self.spacing).floor();
        (raw.max(0.0) as usize).min(self.timestamps.len() - 1)
    }

    /// Visible fraction at `cell` (row-major index) at time `t`, zero
    /// outside coverage.
    pub fn fraction(&self, cell: usize, t: f64) -> f64 {
        let (start, end) = self.coverage();
        if t < start || t >= end {
            return 0.0;
        }
        self.frames[self.frame_index(t) * self.width * self.height + cell]
    }

    pub fn frame_value(&self, frame: usize, cell: usize) -> f64 {
        self.frames[frame * self.width * self.height + cell]
    }

    /// Visible-seconds accumulated at `cell` from coverage start to `t`,
    /// with `t` clamped into coverage.
    fn visible_seconds_to(&self, cell: usize, t: f64) -> f64 {
        let (start, end) = self.coverage();
        let t = t.clamp(start, end);
        let n = self.timestamps.len();
        let i = self.frame_index(t);
        let base = self.cumulative[cell * (n + 1) + i];
        base + self.frames[i * self.width * self.height + cell] * (t - self.timestamps[i])
    }

    /// Integral of the visible fraction over `[t0, t1]`, in seconds.
    /// Portions of the interval outside coverage contribute nothing.
    pub fn visible_seconds(&self, cell: usize, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        self.visible_seconds_to(cell, t1) - self.visible_seconds_to(cell, t0)
    }

    /// Solar energy per unit panel area collected at `cell` over `[t0, t1]`,
    /// in Wh/m², with a piecewise-constant hold between frames.
    pub fn irradiance_energy(&self, cell: usize, t0: f64, t1: f64) -> Result<f64> {
        let (start, end) = self.coverage();
        if !(t0 >= start && t1 <= end && t0 <= t1) {
            return Err(Error::OutsideCoverage { t0, t1, start, end });
        }
        Ok(SOLAR_CONSTANT * self.visible_seconds(cell, t0, t1) / 3600.0)
    }

    /// Constant-fraction pieces `(duration_s, fraction)` covering `[t0, t1]`.
    /// Time outside coverage is reported with fraction 0.
    pub fn pieces(&self, cell: usize, t0: f64, t1: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        if t1 <= t0 {
            return out;
        }
        let (start, end) = self.coverage();
        let mut t = t0;
        if t < start {
            let stop = t1.min(start);
            out.push((stop - t, 0.0));
            t = stop;
        }
        while t < t1 && t < end {
            let i = self.frame_index(t);
            let frame_end = if i + 1 < self.timestamps.len() {
                self.timestamps[i + 1]
            } else {
                end
            };
            let stop = t1.min(frame_end);
            if stop <= t {
                // Guard against a timestamp landing exactly on `t` after rounding.
                t = frame_end.max(t + f64::EPSILON * t.abs().max(1.0));
                continue;
            }
            out.push((stop - t, self.frame_value(i, cell)));
            t = stop;
        }
        if t < t1 {
            out.push((t1 - t, 0.0));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hourly(fraction: f64) -> IlluminationSeries {
        IlluminationSeries::constant(2, 2, 0.0, 3600.0, 4, fraction).unwrap()
    }

    #[test]
    fn full_sun_for_one_hour() {
        let il = hourly(1.0);
        let e = il.irradiance_energy(0, 0.0, 3600.0).unwrap();
        assert!((e - 1367.0).abs() < 1e-9);
    }

    #[test]
    fn shadow_yields_nothing() {
        let il = hourly(0.0);
        assert_eq!(il.irradiance_energy(3, 100.0, 9000.0).unwrap(), 0.0);
    }

    #[test]
    fn piecewise_half_hour_example() {
        // 0.4 for the first half hour, 0.0 afterwards.
        let il = IlluminationSeries::from_fn(1, 2, 0.0, 1800.0, 3, |_, f| if f == 0 { 0.4 } else { 0.0 }).unwrap();
        let e = il.irradiance_energy(0, 0.0, 3600.0).unwrap();
        assert!((e - 273.4).abs() < 0.1, "{e}");
    }

    #[test]
    fn coverage_errors() {
        let il = hourly(1.0);
        assert!(matches!(
            il.irradiance_energy(0, -1.0, 10.0),
            Err(Error::OutsideCoverage { .. })
        ));
        assert!(il.irradiance_energy(0, 0.0, 4.0 * 3600.0).is_ok());
        assert!(il.irradiance_energy(0, 0.0, 4.0 * 3600.0 + 1.0).is_err());
    }

    #[test]
    fn out_of_range_frame_value_names_frame() {
        let mut frames = vec![0.5; 2 * 2 * 3];
        frames[2 * 4 + 1] = 1.2;
        match IlluminationSeries::new(2, 2, vec![0.0, 1.0, 2.0], frames) {
            Err(Error::FrameRange { frame, cell, value }) => {
                assert_eq!((frame, cell), (2, 1));
                assert_eq!(value, 1.2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_uniform_spacing() {
        let r = IlluminationSeries::new(2, 2, vec![0.0, 1.0, 3.0], vec![0.0; 12]);
        assert!(matches!(r, Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn pieces_sum_to_integral() {
        let il = IlluminationSeries::from_fn(1, 2, 0.0, 3600.0, 5, |c, f| ((c + f) % 3) as f64 / 2.0).unwrap();
        for &(t0, t1) in &[(0.0, 18000.0), (1000.0, 7300.0), (-500.0, 20000.0), (3600.0, 3600.0)] {
            let sum: f64 = il.pieces(1, t0, t1).iter().map(|(d, f)| d * f).sum();
            let dur: f64 = il.pieces(1, t0, t1).iter().map(|(d, _)| d).sum();
            assert!((sum - il.visible_seconds(1, t0, t1)).abs() < 1e-9);
            assert!((dur - (t1 - t0).max(0.0)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn energy_is_bounded_and_additive(
            seed in 0u64..1000,
            a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0,
        ) {
            let il = IlluminationSeries::from_fn(3, 2, 100.0, 3600.0, 6, |cell, f| {
                ((seed as usize + 7 * cell + 13 * f) % 11) as f64 / 10.0
            }).unwrap();
            let (start, end) = il.coverage();
            let mut ts = [a, b, c].map(|u| start + u * (end - start));
            ts.sort_by(f64::total_cmp);
            for cell in 0..6 {
                let whole = il.irradiance_energy(cell, ts[0], ts[2]).unwrap();
                let left = il.irradiance_energy(cell, ts[0], ts[1]).unwrap();
                let right = il.irradiance_energy(cell, ts[1], ts[2]).unwrap();
                prop_assert!(whole >= 0.0);
                prop_assert!(whole <= SOLAR_CONSTANT * (ts[2] - ts[0]) / 3600.0 * (1.0 + 1e-12));
                prop_assert!((whole - (left + right)).abs() <= 1e-9 * whole.abs().max(1e-3));
            }
        }
    }
}
