use sramlab::netlist::parse_netlist;
use sramlab::solver::{transient, SolveOptions};

fn main() {
    let text = "\
.model n NMOS VT0=0.3 IS=1e-7 S=0.08 LAMBDA=0.15 ETA=1 GAMMA=0.4 PHIF=0.35
M1 a b 0 0 n
M2 b a 0 0 n
C1 a 0 5f
C2 b 0 5f
.ic a=0.6
.ic b=0.4
.end";
    let n = parse_netlist(text).unwrap();
    let mut opts = SolveOptions::default();
    opts.max_iter = 400;
    match transient(&n, 2e-9, 0.5e-9, &["a", "b"], &opts) {
        Ok(wf) => {
            for i in 0..wf.times.len() {
                println!("t={:.2e} a={:.6} b={:.6}", wf.times[i], wf.samples[0][i], wf.samples[1][i]);
            }
        }
        Err(e) => println!("ERR: {e}"),
    }
}
