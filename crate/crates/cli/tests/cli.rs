use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use snakeseg::metrics::dice;
use snakeseg::volume_io::{read_nifti, write_nifti, ByteOrder, CtVolume, DataType, MaskVolume};
use snakeseg::LevelSet;

struct Scratch(PathBuf);

impl Scratch {
    fn new(name: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("snakeseg-cli-{}-{name}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        Self(dir)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn file(&self, name: &str, bytes: impl AsRef<[u8]>) -> PathBuf {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).unwrap();
        }
        fs::write(&p, bytes).unwrap();
        p
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn snakeseg(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snakeseg"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ct_bytes(ct: &CtVolume) -> Vec<u8> {
    write_nifti(ct, DataType::Int16, ByteOrder::Little).unwrap()
}

fn mask_bytes(m: &MaskVolume) -> Vec<u8> {
    write_nifti(m, DataType::UInt8, ByteOrder::Little).unwrap()
}

fn read_mask(p: &Path) -> MaskVolume {
    read_nifti(&fs::read(p).unwrap())
        .unwrap()
        .0
        .into_mask()
        .unwrap()
}

fn key(text: &str, k: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{k}=")))
        .unwrap_or_else(|| panic!("no {k} in {text}"))
        .to_string()
}

#[test]
fn info_reports_header_and_histogram() {
    let s = Scratch::new("info");
    let data: Vec<f64> = (0..32).map(|i| i as f64 * 10.0 - 100.0).collect();
    let ct = CtVolume::new([4, 4, 2], [0.5, 0.5, 2.0], data).unwrap();
    let vol = s.file("ct.nii", ct_bytes(&ct));
    let o = snakeseg(&[&"info", &vol]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(key(&out, "dim"), "4x4x2");
    assert_eq!(key(&out, "spacing"), "0.5,0.5,2");
    assert_eq!(key(&out, "datatype"), "int16");
    assert_eq!(key(&out, "range"), "-100,210");

    let labels: Vec<u16> = (0..32).map(|i| [0, 0, 1, 2][i % 4]).collect();
    let mask = s.file(
        "mask.nii",
        mask_bytes(&MaskVolume::new([4, 4, 2], [1.0; 3], labels).unwrap()),
    );
    let out = stdout(&snakeseg(&[&"info", &mask]));
    assert_eq!(key(&out, "label.0"), "16");
    assert_eq!(key(&out, "label.1"), "8");
    assert_eq!(key(&out, "label.2"), "8");
}

#[test]
fn truncated_file_exits_2() {
    let s = Scratch::new("truncated");
    let ct = CtVolume::new([4, 4, 2], [1.0; 3], vec![0.0; 32]).unwrap();
    let mut bytes = ct_bytes(&ct);
    bytes.truncate(bytes.len() - 5);
    let vol = s.file("ct.nii", bytes);
    let o = snakeseg(&[&"info", &vol]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("volume_io:"), "{}", stderr(&o));
}

const N: usize = 80;

fn phantom(s: &Scratch) -> (PathBuf, MaskVolume, String) {
    let disks = [(36.0, 40.0, 12.0), (40.0, 42.0, 14.0), (44.0, 40.0, 11.0)];
    let masks: Vec<LevelSet> = disks
        .iter()
        .map(|&(cx, cy, r)| LevelSet::disk(N, N, cx, cy, r))
        .collect();
    let slices: Vec<_> = masks
        .iter()
        .map(|m| m.map(|&b| if b { 300.0 } else { -200.0 }))
        .collect();
    let ct = CtVolume::from_slices(&slices, [1.0; 3]).unwrap();
    let mut dets = String::new();
    for (z, &(cx, cy, r)) in disks.iter().enumerate() {
        let n = N as f64;
        // disk pixels span [c - r, c + r]; the half-open box ends one past
        let w = (2.0 * r + 1.0) / n;
        dets.push_str(&format!(
            "{z} 0 0.9 {} {} {w} {w}\n",
            (cx + 0.5) / n,
            (cy + 0.5) / n
        ));
    }
    (
        s.file("phantom.nii", ct_bytes(&ct)),
        MaskVolume::from_level_sets(&masks, [1.0; 3]).unwrap(),
        dets,
    )
}

#[test]
fn segment_phantom_is_accurate_and_deterministic() {
    let s = Scratch::new("segment");
    let (vol, truth, dets) = phantom(&s);
    let det = s.file("dets.txt", &dets);
    let (a, b) = (s.path("a.nii"), s.path("b.nii"));
    let o = snakeseg(&[&"segment", &vol, &det, &"--out", &a]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stderr(&o).matches("slice ").count(), 3);
    let d = dice(&read_mask(&a), &truth).unwrap();
    assert!(d >= 0.90, "dice {d}");
    assert!(snakeseg(&[&"segment", &vol, &det, &"--out", &b])
        .status
        .success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn segment_reads_per_slice_directory() {
    let s = Scratch::new("segment-dir");
    let (vol, truth, dets) = phantom(&s);
    for line in dets.lines() {
        let (z, rest) = line.split_once(' ').unwrap();
        s.file(&format!("dets/case_{z:0>3}.txt"), format!("{rest}\n"));
    }
    let out = s.path("m.nii");
    let o = snakeseg(&[&"segment", &vol, &s.path("dets"), &"--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dice(&read_mask(&out), &truth).unwrap() >= 0.90);
}

#[test]
fn segment_honours_confidence_gate_and_config() {
    let s = Scratch::new("segment-conf");
    let (vol, _, dets) = phantom(&s);
    let det = s.file("dets.txt", &dets);
    let out = s.path("m.nii");
    let o = snakeseg(&[&"segment", &vol, &det, &"--conf", &"0.9", &"--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_mask(&out).foreground_count(), 0);

    let cfg = s.file("run.cfg", "# gate everything\nconf = 0.95\n");
    let o = snakeseg(&[&"segment", &vol, &det, &"--config", &cfg, &"--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_mask(&out).foreground_count(), 0);

    let bad = s.file("bad.cfg", "theta = 3\n");
    let o = snakeseg(&[&"segment", &vol, &det, &"--config", &bad, &"--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("morphsnakes:"), "{}", stderr(&o));
}

#[test]
fn segment_empty_and_malformed_detections() {
    let s = Scratch::new("segment-empty");
    let (vol, _, _) = phantom(&s);
    let out = s.path("m.nii");
    let empty = s.file("empty.txt", "");
    let o = snakeseg(&[&"segment", &vol, &empty, &"--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = read_mask(&out);
    assert_eq!(m.dims(), [N, N, 3]);
    assert_eq!(m.foreground_count(), 0);

    let bad = s.file(
        "bad.txt",
        "0 0 0.9 0.5 0.5 0.2 0.2\n1 0 0.9 0.5 oops 0.2 0.2\n",
    );
    let o = snakeseg(&[&"segment", &vol, &bad, &"--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

fn column_mask(s: &Scratch, name: &str, bits: &[u16]) -> PathBuf {
    s.file(
        name,
        mask_bytes(&MaskVolume::new([bits.len(), 1, 1], [1.0; 3], bits.to_vec()).unwrap()),
    )
}

#[test]
fn eval_seg_reports() {
    let s = Scratch::new("eval-seg");
    let a = column_mask(&s, "a.nii", &[1, 1, 0, 0]);
    let same = stdout(&snakeseg(&[&"eval-seg", &a, &a]));
    assert_eq!(
        (key(&same, "mean"), key(&same, "std")),
        ("1".into(), "0".into())
    );
    let disjoint = column_mask(&s, "b.nii", &[0, 0, 1, 1]);
    let out = stdout(&snakeseg(&[&"eval-seg", &a, &disjoint]));
    assert_eq!(
        (key(&out, "mean"), key(&out, "std")),
        ("0".into(), "0".into())
    );
    let half = column_mask(&s, "c.nii", &[0, 1, 1, 0]);
    assert_eq!(
        key(&stdout(&snakeseg(&[&"eval-seg", &a, &half])), "mean"),
        "0.5"
    );

    let short = column_mask(&s, "d.nii", &[1, 1, 0]);
    assert_eq!(snakeseg(&[&"eval-seg", &a, &short]).status.code(), Some(2));
}

#[test]
fn eval_seg_pairs_directories() {
    let s = Scratch::new("eval-seg-dir");
    let one =
        |bits: &[u16]| mask_bytes(&MaskVolume::new([4, 1, 1], [1.0; 3], bits.to_vec()).unwrap());
    s.file("pred/x.nii", one(&[1, 1, 0, 0]));
    s.file("pred/y.nii", one(&[1, 0, 0, 0]));
    s.file("truth/x.nii", one(&[1, 1, 0, 0]));
    s.file("truth/y.nii", one(&[0, 1, 0, 0]));
    let o = snakeseg(&[&"eval-seg", &s.path("pred"), &s.path("truth"), &"--records"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "case\tdice\tx.nii\t1\ncase\tdice\ty.nii\t0\nsummary\tdice\t0.5\t0.5\n"
    );
    s.file("truth/z.nii", one(&[0, 0, 0, 0]));
    let o = snakeseg(&[&"eval-seg", &s.path("pred"), &s.path("truth")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("z.nii"));
}

#[test]
fn eval_det_average_precision_examples() {
    let s = Scratch::new("eval-det");
    // ground truth covers x in [0.1, 0.3), y in [0.1, 0.3)
    let truth = s.file("truth.txt", "0 0.2 0.2 0.2 0.2\n");
    // same width, 60% resp. 10% of the height: IoU 0.6 and 0.1
    let good = "0.2 0.16 0.2 0.12";
    let poor = "0.2 0.11 0.2 0.02";
    let cases = [
        (format!("0 0.9 {good}\n0 0.8 {poor}\n"), "1"),
        (format!("0 0.9 {poor}\n0 0.8 {good}\n"), "0.5"),
        ("0 0.9 0.8 0.8 0.1 0.1\n".to_string(), "0"),
    ];
    for (i, (preds, want)) in cases.iter().enumerate() {
        let p = s.file(&format!("pred{i}.txt"), preds);
        let o = snakeseg(&[&"eval-det", &p, &truth]);
        assert!(o.status.success(), "{}", stderr(&o));
        let out = stdout(&o);
        assert_eq!(key(&out, "class.0.ap"), *want, "case {i}");
        assert_eq!(key(&out, "map"), *want, "case {i}");
    }
}

#[test]
fn eval_det_merges_classes() {
    let s = Scratch::new("eval-det-merge");
    let truth = s.file("truth.txt", "1 0.5 0.5 0.2 0.2\n");
    let pred = s.file("pred.txt", "0 0.9 0.5 0.5 0.2 0.2\n");
    let split = stdout(&snakeseg(&[&"eval-det", &pred, &truth]));
    assert_eq!(key(&split, "class.0.ap"), "no-gt");
    assert_eq!(key(&split, "map"), "0");
    let merged = stdout(&snakeseg(&[&"eval-det", &pred, &truth, &"--merge-classes"]));
    assert_eq!(key(&merged, "map"), "1");
    assert_eq!(key(&merged, "precision"), "1");
}

#[test]
fn probmap_matches_hand_counts() {
    let s = Scratch::new("probmap");
    let m =
        |bits: &[u16]| mask_bytes(&MaskVolume::new([2, 2, 1], [1.0; 3], bits.to_vec()).unwrap());
    let a = s.file("a.nii", m(&[1, 0, 0, 0]));
    let b = s.file("b.nii", m(&[1, 1, 0, 0]));
    let out = s.path("p.nii");
    let o = snakeseg(&[&"probmap", &a, &b, &"--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(key(&stdout(&o), "x"), "0..1");
    let (map, hdr) = read_nifti(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(hdr.datatype, DataType::Float32);
    assert_eq!(map.into_ct().data(), &[1.0, 0.5, 0.0, 0.0]);
    let o = snakeseg(&[&"probmap", &a, &b, &"--threshold", &"0.6"]);
    assert_eq!(key(&stdout(&o), "x"), "0..0");
}

#[test]
fn stats_matches_hand_arithmetic() {
    let s = Scratch::new("stats");
    let ct = CtVolume::new([4, 1, 1], [1.0; 3], vec![0.0, 100.0, -1000.0, 40.0]).unwrap();
    let mask = MaskVolume::new([4, 1, 1], [1.0; 3], vec![1, 1, 0, 0]).unwrap();
    let o = snakeseg(&[
        &"stats",
        &s.file("ct.nii", ct_bytes(&ct)),
        &s.file("m.nii", mask_bytes(&mask)),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(key(&out, "mean"), "50");
    assert_eq!(key(&out, "std"), "50");
    assert_eq!(key(&out, "body_voxels"), "3");
}

#[test]
fn postprocess_fixture() {
    let s = Scratch::new("postprocess");
    let m = MaskVolume::new([1, 1, 3], [1.0; 3], vec![0, 1, 0]).unwrap();
    let input = s.file("m.nii", mask_bytes(&m));
    let out = s.path("p.nii");
    assert!(snakeseg(&[&"postprocess", &input, &"--out", &out])
        .status
        .success());
    assert_eq!(read_mask(&out).labels(), &[0, 0, 0]);
}

#[test]
fn export_writes_pgm_and_labels() {
    let s = Scratch::new("export");
    let ct = CtVolume::new(
        [4, 2, 1],
        [1.0; 3],
        vec![-200.0, 300.0, 50.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    )
    .unwrap();
    let mask = MaskVolume::new([4, 2, 1], [1.0; 3], vec![0, 2, 2, 0, 0, 0, 0, 0]).unwrap();
    let out = s.path("slice.pgm");
    let o = snakeseg(&[
        &"export",
        &s.file("ct.nii", ct_bytes(&ct)),
        &"--slice",
        &"0",
        &"--mask",
        &s.file("m.nii", mask_bytes(&mask)),
        &"--out",
        &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pgm = fs::read(&out).unwrap();
    assert!(pgm.starts_with(b"P5\n4 2\n255\n"));
    assert_eq!(&pgm[pgm.len() - 8..pgm.len() - 5], &[0, 255, 128]);
    assert_eq!(
        fs::read_to_string(s.path("slice.txt")).unwrap(),
        "1 0.5 0.25 0.5 0.5\n"
    );
    let o = snakeseg(&[
        &"export",
        &s.path("ct.nii"),
        &"--slice",
        &"3",
        &"--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(2));
}
