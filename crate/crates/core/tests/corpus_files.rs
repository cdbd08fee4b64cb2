use std::fs::File;
use std::io::BufReader;

use convrec::den_graph::{compile, count_transitions, DenominatorFsa, TransitionModel};
use convrec::pipeline::{export_synth, load_corpus, run_on, PipelineConfig};
use convrec::senone_lm::MixedHistoryLm;
use convrec::synth::{synth_corpus, SynthConfig};

fn small() -> PipelineConfig {
    PipelineConfig {
        seed: 11,
        synth: Some(SynthConfig {
            num_utts: 20,
            nbest: 6,
            lm_training_sentences: 60,
            frames_per_utt: 30,
            ..Default::default()
        }),
        ..Default::default()
    }
}

#[test]
fn exported_corpus_reads_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    let file_cfg = export_synth(&cfg, dir.path()).unwrap();
    let synth = SynthConfig { seed: cfg.seed, ..cfg.synth.clone().unwrap() };
    let memory = synth_corpus(&synth).unwrap();
    let loaded = load_corpus(file_cfg.data.as_ref().unwrap(), dir.path()).unwrap();
    assert_eq!(loaded, memory);
    assert_eq!(
        run_on(&cfg, &memory).unwrap().to_json().unwrap(),
        run_on(&file_cfg, &loaded).unwrap().to_json().unwrap()
    );
}

#[test]
fn graph_and_transitions_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let c = synth_corpus(&small().synth.unwrap()).unwrap();
    let lm = MixedHistoryLm::estimate(&c.alignments, &c.inventory).unwrap();
    let tm = count_transitions(&c.alignments).unwrap();
    let fsa = compile(&lm, &tm, &c.inventory).unwrap();

    let gp = dir.path().join("g.fsa");
    let tp = dir.path().join("tm.txt");
    fsa.write(File::create(&gp).unwrap()).unwrap();
    tm.write(File::create(&tp).unwrap()).unwrap();
    let fsa2 = DenominatorFsa::read(BufReader::new(File::open(&gp).unwrap())).unwrap();
    let tm2 = TransitionModel::read(BufReader::new(File::open(&tp).unwrap())).unwrap();
    assert_eq!(fsa2, fsa);
    assert_eq!(tm2, tm);
}
