use std::path::Path;
use std::process::{Command, Output};

fn jointrec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jointrec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn full_mask_zero_filled_is_near_exact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(jointrec(d, &["phantom", "--size", "64", "-o", "gt.png"])
        .status
        .success());
    assert!(jointrec(
        d,
        &["acquire", "-i", "gt.png", "--accel", "1", "-o", "k.jrk"]
    )
    .status
    .success());
    let o = jointrec(
        d,
        &["recon", "-k", "k.jrk", "-o", "r.png", "--truth", "gt.png"],
    );
    assert!(o.status.success());
    let p: f64 = stdout(&o)
        .trim()
        .strip_prefix("psnr ")
        .unwrap()
        .parse()
        .unwrap();
    assert!(p >= 100.0, "psnr {p}");
}

#[test]
fn sweep_writes_sixteen_rows_and_bdpsnr_of_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = jointrec(
        d,
        &[
            "sweep",
            "--size",
            "64",
            "--method",
            "decoupled",
            "--alpha",
            "0",
            "-o",
            "c.csv",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.join("c.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("qp,bpp,psnr"));
    assert_eq!(text.lines().count(), 17);

    let o = jointrec(d, &["bdpsnr", "c.csv", "c.csv"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn compress_then_decode_reports_the_same_rate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    jointrec(d, &["phantom", "--size", "64", "-o", "gt.png"]);
    jointrec(d, &["acquire", "-i", "gt.png", "-o", "k.jrk"]);
    let o = jointrec(
        d,
        &[
            "compress",
            "-k",
            "k.jrk",
            "--method",
            "decoupled",
            "--qp",
            "25",
            "-o",
            "b.jrc",
            "--log",
            "t.csv",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bits = stdout(&o).split_whitespace().nth(1).unwrap().to_string();
    let o = jointrec(d, &["decode", "-i", "b.jrc", "-o", "v.png"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).split_whitespace().nth(1).unwrap(), bits);
    let log = std::fs::read_to_string(d.join("t.csv")).unwrap();
    assert!(log.starts_with("t,w,bit_count,bpp,psnr,beta,qp,alpha,termination"));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(jointrec(dir.path(), &["nonsense"]).status.code(), Some(1));
    assert_eq!(jointrec(dir.path(), &["recon"]).status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = jointrec(dir.path(), &["recon", "-k", "missing.jrk", "-o", "r.png"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_codec_binary_exits_with_three_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    jointrec(d, &["phantom", "--size", "32", "-o", "gt.png"]);
    jointrec(d, &["acquire", "-i", "gt.png", "-o", "k.jrk"]);
    let o = jointrec(
        d,
        &[
            "compress",
            "-k",
            "k.jrk",
            "--codec",
            "external",
            "--encode-cmd",
            "no-such-encoder-xyz {input} {output}",
            "--decode-cmd",
            "no-such-decoder-xyz {input} {output}",
            "-o",
            "b.bin",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-such-encoder-xyz"));
}

#[test]
fn config_without_methods_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.toml"), "output_dir = \"out\"\nmethods = []\n").unwrap();
    let o = jointrec(d, &["run", "c.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.join("out").exists());
}

#[test]
fn run_writes_curves_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("c.toml"),
        "output_dir = \"out\"\nmethods = [\"decoupled:0\", \"none:0\"]\n\
         [input]\nphantom = \"shepp-logan\"\nsize = 32\n[sweep]\nqps = [4, 19, 31, 49]\n",
    )
    .unwrap();
    let o = jointrec(d, &["run", "c.toml"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.join("out");
    assert!(out.join("report.csv").exists());
    assert!(out.join("plot.svg").exists());
    assert!(out.join("curves").read_dir().unwrap().count() >= 1);
}
