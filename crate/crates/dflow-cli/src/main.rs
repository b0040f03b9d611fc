use std::process::ExitCode;

const USAGE: &str = "\
dflow - spectral laboratory for dispersive curve flows

USAGE:
    dflow --scenario <name> [options]
    dflow --config <file> [overriding options]

SCENARIOS:
    linear-lab            evolve the auxiliary linear dispersive equation
    flow                  integrate the (regularized) curve flow
    gauge-probe           measure gauged vs ungauged top-norm growth rates
    epsilon-continuation  compare runs across regularization strengths
    invariants            run the property suite and print a pass/fail table

OPTIONS (kebab-case flags mirror snake_case config keys):
    --config <file>       flat key = value file; flags override it
    --target <t>          s2 | s6 | flatc            [default: s2]
    --preset <p>          da-rios | fukumoto-miyazaki
    --n <even int>        grid nodes                 [default: 128]
    --period <float>      torus length               [default: 1, linear-lab: 2*pi]
    --a --b --eps <float> flow coefficients          [default: 1, 0, 0]
    --k-gauge <int>       gauged energy level        [default: 2]
    --dt <float>          time step                  [default: stability-derived]
    --t-end <float>       horizon                    [default: 0.1]
    --k-list <ints>       probe spike frequencies    [default: 8,16,32]
    --eps-list <floats>   continuation strengths     [default: 1e-2,1e-3,1e-4,0]
    --seed <int>          deterministic seed         [default: 7]
    --output-dir <path>   artifact directory         [default: out]
    --emit-svg            also render SVG line charts
    --emit-snapshots      also dump binary curve snapshots (flow scenario)

EXIT CODES:
    0 success, 1 invariant failure, 2 config error, 3 numerical blow-up, 4 I/O error
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args.iter().any(|a| a == "--help" || a == "-h") {
        print!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    let cfg = match dflow_cli::from_args(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match dflow_cli::run(&cfg) {
        Ok(artifacts) => {
            for a in artifacts {
                println!("wrote {}", a.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
