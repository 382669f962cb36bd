//! Reference denoiser plugin used to exercise the wire protocol.
//!
//! Usage: `sure-amp-ref-plugin [identity|blur|crash|hang]`
//!
//! * `identity` echoes every payload;
//! * `blur` applies the periodic 3x3 kernel `[1 2 1; 2 4 2; 1 2 1] / 16`
//!   (to each part of complex inputs);
//! * `crash` writes a message to stderr and exits with status 3 on the first
//!   request;
//! * `hang` never answers requests.

use std::io::{self, BufReader, BufWriter};
use std::process::ExitCode;

use sure_amp::denoise::{serve, PluginRequest};

fn blur(req: &PluginRequest, v: &[f32]) -> Vec<f32> {
    let (h, w) = (req.h, req.w);
    let parts = if req.complex { 2 } else { 1 };
    let k = [[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]];
    let mut out = vec![0.0f32; v.len()];
    for p in 0..parts {
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0f64;
                for (di, row) in k.iter().enumerate() {
                    for (dj, wt) in row.iter().enumerate() {
                        let ii = (i + h + di - 1) % h;
                        let jj = (j + w + dj - 1) % w;
                        acc += wt * v[(ii * w + jj) * parts + p] as f64;
                    }
                }
                out[(i * w + j) * parts + p] = (acc / 16.0) as f32;
            }
        }
    }
    out
}

fn main() -> ExitCode {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "identity".into());
    if !matches!(mode.as_str(), "identity" | "blur" | "crash" | "hang") {
        eprintln!("unknown mode {mode:?}; expected identity, blur, crash or hang");
        return ExitCode::from(2);
    }
    let input = BufReader::new(io::stdin().lock());
    let output = BufWriter::new(io::stdout().lock());
    let result = serve(input, output, |req, v| match mode.as_str() {
        "identity" => Ok(v),
        "blur" => Ok(blur(req, &v)),
        "crash" => {
            eprintln!("ref plugin: simulated crash on {}x{} request", req.h, req.w);
            std::process::exit(3);
        }
        _ => loop {
            std::thread::park();
        },
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ref plugin: {e}");
            ExitCode::FAILURE
        }
    }
}
