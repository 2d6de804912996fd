use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use visage_core::architectures::{ArchitectureSpec, LayerKind, LayerSpec, Model};
use visage_core::trainer::derive_rng;
use visage_core::verification::{angular_scatter, EmbeddingStore};

fn visage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_visage")).args(args).env("DV_THREADS", "2").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_idx(dir: &Path, prefix: &str, images: &[Vec<u8>], labels: &[u8], rows: u32, cols: u32) {
    let mut img = Vec::new();
    img.extend_from_slice(&2051u32.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&rows.to_be_bytes());
    img.extend_from_slice(&cols.to_be_bytes());
    for i in images {
        img.extend_from_slice(i);
    }
    fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), img).unwrap();
    let mut lab = Vec::new();
    lab.extend_from_slice(&2049u32.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), lab).unwrap();
}

/// Two classes: bright left half or bright right half, with pixel noise.
fn toy_mnist(dir: &Path) {
    let make = |n: usize, salt: usize| {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = (i % 2) as u8;
            let img: Vec<u8> = (0..784)
                .map(|p| {
                    let x = p % 28;
                    let on = if label == 0 { x < 14 } else { x >= 14 };
                    let noise = ((p * 31 + i * 17 + salt) % 60) as u8;
                    if on { 180 + noise } else { noise }
                })
                .collect();
            images.push(img);
            labels.push(label);
        }
        (images, labels)
    };
    let (ti, tl) = make(200, 0);
    write_idx(dir, "train", &ti, &tl, 28, 28);
    let (vi, vl) = make(40, 7);
    write_idx(dir, "t10k", &vi, &vl, 28, 28);
}

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        fs::create_dir_all(root.join("data")).unwrap();
        toy_mnist(&root.join("data"));
        fs::write(
            root.join("run.cfg"),
            format!(
                "data = {}\nwidths = 2,2,4\nbase_lr = 0.05\nbatch_size = 20\ntrain_fraction = 0.9\n",
                root.join("data").display()
            ),
        )
        .unwrap();
        Self { _tmp: tmp, root }
    }

    fn path(&self, p: &str) -> String {
        self.root.join(p).display().to_string()
    }

    fn train(&self, out: &str, extra: &[&str]) -> Output {
        let cfg = self.path("run.cfg");
        let out = self.path(out);
        let mut args = vec!["train", "--config", &cfg, "--out", &out, "--seed", "7", "--epochs", "2"];
        args.extend_from_slice(extra);
        visage(&args)
    }
}

#[test]
fn zero_epochs_is_a_usage_error() {
    let f = Fixture::new();
    let cfg = f.path("run.cfg");
    let o = visage(&["train", "--config", &cfg, "--epochs", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nothing to train"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let f = Fixture::new();
    fs::write(f.root.join("bad.cfg"), "learning_rate = 0.1\n").unwrap();
    let o = visage(&["gradcheck", "--config", &f.path("bad.cfg")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown config key"));
}

#[test]
fn missing_data_is_a_data_error() {
    let f = Fixture::new();
    let o = visage(&["train", "--data", &f.path("nowhere"), "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn train_is_deterministic_and_features_dump_is_consistent() {
    let f = Fixture::new();
    let a = f.train("a", &["--fn", "on", "--deterministic"]);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = f.train("b", &["--fn", "on", "--deterministic"]);
    assert!(b.status.success());
    let log_a = fs::read_to_string(f.root.join("a/metrics.tsv")).unwrap();
    assert_eq!(log_a, fs::read_to_string(f.root.join("b/metrics.tsv")).unwrap());
    assert_eq!(log_a.lines().count(), 3);
    assert!(log_a.starts_with("epoch\tlr\ttrain_loss\tmonitor_acc\n"));
    assert_eq!(fs::read(f.root.join("a/model.dvck")).unwrap(), fs::read(f.root.join("b/model.dvck")).unwrap());
    assert!(stdout(&a).contains("test_accuracy"));

    let ck = f.path("a/model.dvck");
    let o = visage(&["features2d", "--checkpoint", &ck, "--data", &f.path("data"), "--limit", "10", "--out", &f.path("a")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dump = fs::read_to_string(f.root.join("a/features2d.txt")).unwrap();
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for line in dump.lines() {
        let v: Vec<&str> = line.split(' ').collect();
        assert_eq!(v.len(), 3);
        feats.push(vec![v[0].parse::<f32>().unwrap(), v[1].parse::<f32>().unwrap()]);
        let l: usize = v[2].parse().unwrap();
        assert!(l <= 9);
        labels.push(l);
    }
    assert_eq!(feats.len(), 10);
    let summary = angular_scatter(&feats, &labels).unwrap();
    let printed: f64 = stdout(&o).lines().find_map(|l| l.strip_prefix("ratio\t")).unwrap().parse().unwrap();
    assert!((printed - summary.ratio).abs() <= 1e-6 * summary.ratio.abs().max(1.0));
}

#[test]
fn features2d_rejects_wide_features() {
    let f = Fixture::new();
    let spec = ArchitectureSpec {
        input_shape: [1, 28, 28],
        layers: vec![LayerSpec::new(LayerKind::FullyConnected, 3, 1), LayerSpec::new(LayerKind::ClassifierHead, 2, 1)],
        feature_dim: 3,
        num_classes: 2,
        center_loss: None,
    };
    let mut model = Model::<f32>::new(spec.clone(), &mut derive_rng(0, 1)).unwrap();
    model.to_checkpoint(true).save(&f.root.join("wide.dvck")).unwrap();
    fs::write(f.root.join("wide.arch"), spec.to_text()).unwrap();
    let o = visage(&["features2d", "--checkpoint", &f.path("wide.dvck"), "--data", &f.path("data"), "--out", &f.path("w")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gradcheck_filter_and_failure_reporting() {
    let o = visage(&["gradcheck", "--op", "prelu"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    let ops: Vec<&str> = text.lines().skip(1).filter(|l| !l.starts_with(' ')).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(ops, vec!["prelu"]);
    let o = visage(&["gradcheck", "--op", "conv2d", "--tolerance", "0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL"));
    assert_eq!(visage(&["gradcheck", "--op", "nonsense"]).status.code(), Some(1));
}

fn write_store(dir: &Path, rows: &[Vec<f32>], identities: &[String]) -> PathBuf {
    let dim = rows[0].len();
    let store = EmbeddingStore::new(dim, rows.concat()).unwrap();
    let path = dir.join("emb.dvem");
    fs::write(&path, store.to_bytes()).unwrap();
    let manifest: String = identities.iter().enumerate().map(|(i, id)| format!("{i} img{i}.png {id}\n")).collect();
    fs::write(dir.join("emb.manifest"), manifest).unwrap();
    path
}

fn report_value(out: &str, key: &str) -> f64 {
    out.lines().find_map(|l| l.strip_prefix(&format!("{key}\t"))).unwrap_or_else(|| panic!("{key} missing")).parse().unwrap()
}

#[test]
fn eval_separable_store() {
    let f = Fixture::new();
    // identity k lives near axis k
    let mut rows = Vec::new();
    let mut ids = Vec::new();
    for k in 0..4 {
        for j in 0..5 {
            let mut v = vec![0.01 * j as f32; 4];
            v[k] = 1.0;
            rows.push(v);
            ids.push(format!("id{k}"));
        }
    }
    let store = write_store(&f.root, &rows, &ids);
    let mut pairs = String::new();
    for i in 0..20 {
        for j in i + 1..20 {
            pairs.push_str(&format!("img{i}.png,img{j}.png,{}\n", u8::from(i / 5 == j / 5)));
        }
    }
    fs::write(f.root.join("pairs.csv"), pairs).unwrap();
    let o = visage(&["eval", "--store", &store.display().to_string(), "--pairs", &f.path("pairs.csv"), "--out", &f.path("ev"), "--far-targets", "0.001"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(report_value(&out, "accuracy_mean"), 1.0);
    assert_eq!(report_value(&out, "tar@far=0.001"), 1.0);
    let roc = fs::read_to_string(f.root.join("ev/roc.tsv")).unwrap();
    assert!(roc.starts_with("far\ttar\tthreshold\n"));

    let o = visage(&["eval", "--store", &store.display().to_string(), "--out", &f.path("ex")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(report_value(&out, "pairs"), 190.0);
    assert_eq!(report_value(&out, "genuine"), 40.0);
    assert_eq!(report_value(&out, "tar@far=0.01"), 1.0);
}

#[test]
fn eval_missing_embedding_names_the_pair() {
    let f = Fixture::new();
    let store = write_store(&f.root, &[vec![1.0, 0.0], vec![0.0, 1.0]], &["a".into(), "b".into()]);
    fs::write(f.root.join("pairs.csv"), "img0.png,img1.png,0\nimg0.png,ghost.png,1\n").unwrap();
    let o = visage(&["eval", "--store", &store.display().to_string(), "--pairs", &f.path("pairs.csv"), "--out", &f.path("ev")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pair 2") && stderr(&o).contains("ghost.png"));
}

/// Small deterministic generator so the expectation is computed here, not by the tool.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[test]
fn eval_random_store_is_chance_and_matches_brute_force() {
    let f = Fixture::new();
    let mut rng = Lcg(42);
    let n = 400;
    let rows: Vec<Vec<f32>> = (0..n).map(|_| (0..8).map(|_| (rng.next() * 2.0 - 1.0) as f32).collect()).collect();
    let ids: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let store = write_store(&f.root, &rows, &ids);
    let mut pairs = String::new();
    let mut truth = Vec::new();
    for _ in 0..10_000 {
        let a = (rng.next() * n as f64) as usize;
        let mut b = (rng.next() * n as f64) as usize;
        if b == a {
            b = (a + 1) % n;
        }
        let label = rng.next() < 0.5;
        pairs.push_str(&format!("img{a}.png,img{b}.png,{}\n", u8::from(label)));
        let (x, y) = (&rows[a], &rows[b]);
        let dot: f64 = x.iter().zip(y).map(|(p, q)| *p as f64 * *q as f64).sum();
        let nx: f64 = x.iter().map(|p| (*p as f64).powi(2)).sum::<f64>().sqrt();
        let ny: f64 = y.iter().map(|p| (*p as f64).powi(2)).sum::<f64>().sqrt();
        truth.push((dot / (nx * ny), label));
    }
    fs::write(f.root.join("pairs.csv"), pairs).unwrap();
    let o = visage(&["eval", "--store", &store.display().to_string(), "--pairs", &f.path("pairs.csv"), "--out", &f.path("ev"), "--far-targets", "0.01,0.001"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let acc = report_value(&out, "accuracy_mean");
    assert!((acc - 0.5).abs() <= 0.02, "accuracy {acc}");
    let impostors: Vec<f64> = truth.iter().filter(|t| !t.1).map(|t| t.0).collect();
    let genuine: Vec<f64> = truth.iter().filter(|t| t.1).map(|t| t.0).collect();
    for target in [0.01, 0.001] {
        // best TAR over every threshold whose FAR stays within the target
        let mut best: f64 = 0.0;
        for &t in truth.iter().map(|(s, _)| s).chain([f64::INFINITY].iter()) {
            let far = impostors.iter().filter(|&&s| s >= t).count() as f64 / impostors.len() as f64;
            if far <= target {
                best = best.max(genuine.iter().filter(|&&s| s >= t).count() as f64 / genuine.len() as f64);
            }
        }
        let got = report_value(&out, &format!("tar@far={target}"));
        assert!((got - best).abs() < 1e-9, "target {target}: {got} vs {best}");
    }
}

fn write_png(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> [u8; 3]) {
    let img = image::RgbImage::from_fn(w, h, |x, y| image::Rgb(f(x, y)));
    img.save(path).unwrap();
}

#[test]
fn embed_writes_store_manifest_and_provenance() {
    let f = Fixture::new();
    let spec = ArchitectureSpec {
        input_shape: [1, 112, 96],
        layers: vec![
            LayerSpec::new(LayerKind::ConvPrelu, 2, 1),
            LayerSpec::new(LayerKind::MaxPool, 2, 1),
            LayerSpec::new(LayerKind::FullyConnected, 16, 1),
            LayerSpec::new(LayerKind::FeatureNorm, 16, 1),
            LayerSpec::new(LayerKind::ClassifierHead, 3, 1),
        ],
        feature_dim: 16,
        num_classes: 3,
        center_loss: None,
    };
    let mut model = Model::<f32>::new(spec.clone(), &mut derive_rng(3, 1)).unwrap();
    model.to_checkpoint(false).save(&f.root.join("face.dvck")).unwrap();
    fs::write(f.root.join("face.arch"), spec.to_text()).unwrap();

    let images = f.root.join("images");
    let mut manifest = String::new();
    for i in 0..9u32 {
        let dir = images.join(format!("person{}", i % 3));
        fs::create_dir_all(&dir).unwrap();
        write_png(&dir.join(format!("{i}.png")), 120, 140, |x, y| [(x * 2 + i * 5) as u8, (y + i) as u8, ((x + y) % 250) as u8]);
        let flag = if i == 4 { 0 } else { 1 };
        manifest.push_str(&format!(
            "person{}/{i}.png 40 60 80 60 60 80 45 100 75 100 10 10 100 120 {flag}\n",
            i % 3
        ));
    }
    // the same image twice must embed identically
    manifest.push_str("person0/0.png 40 60 80 60 60 80 45 100 75 100 10 10 100 120 1\n");
    manifest.push_str("person9/missing.png 40 60 80 60 60 80 45 100 75 100 10 10 100 120 1\n");
    fs::write(images.join("landmarks.txt"), manifest).unwrap();

    let o = visage(&["embed", "--checkpoint", &f.path("face.dvck"), "--manifest", &images.join("landmarks.txt").display().to_string(), "--out", &f.path("emb")]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("missing.png"));
    let store = EmbeddingStore::from_bytes(&fs::read(f.root.join("emb/embeddings.dvem")).unwrap()).unwrap();
    assert_eq!((store.count(), store.dim), (10, 16));
    assert_eq!(store.row(0), store.row(9));
    let manifest = fs::read_to_string(f.root.join("emb/embeddings.manifest")).unwrap();
    assert_eq!(manifest.lines().next().unwrap(), "0 person0/0.png person0");
    let prov = fs::read_to_string(f.root.join("emb/provenance.tsv")).unwrap();
    assert!(prov.lines().any(|l| l == "4\tperson1/4.png\tfallback_crop"));
    assert_eq!(prov.lines().filter(|l| l.ends_with("\taligned")).count(), 9);
}
