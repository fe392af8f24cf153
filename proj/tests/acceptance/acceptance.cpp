// Acceptance gate: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails. `awe_acceptance 3 5` runs only criteria 3 and 5.

#include <Eigen/QR>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "awe/checkpoint.hpp"
#include "awe/classifier.hpp"
#include "awe/dataset.hpp"
#include "awe/evaluation.hpp"
#include "awe/optim.hpp"
#include "awe/siamese.hpp"
#include "awe/synth.hpp"
#include "support.hpp"

namespace {

using namespace awe;
using awe::testing::GradientCase;
using awe::testing::LossKind;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// 1. Finite-difference gradients for every architecture / head / loss combination.
Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  double worst = 0.0, worst_coordinate = 0.0;
  std::string worst_case;
  int cases = 0;
  for (CellKind cell : {CellKind::lstm, CellKind::gru}) {
    for (int s = 1; s <= 3; ++s) {
      for (int f = 1; f <= 3; ++f) {
        for (Head head : {Head::log_softmax, Head::linear}) {
          for (LossKind loss : {LossKind::cross_entropy, LossKind::cos_hinge}) {
            GradientCase c{cell, s, f, head, loss, 5, 8, 11};
            const auto report = awe::testing::check_network_gradient(c, 1e-3);
            ++cases;
            worst_coordinate = std::max(worst_coordinate, report.coordinates.max_relative_error);
            if (report.max_tensor_error >= worst) {
              worst = report.max_tensor_error;
              worst_case = awe::testing::describe(c) + " " + report.worst_tensor;
            }
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 120.0,
          std::to_string(cases) + " cases, max rel err per parameter tensor " + fmt(worst, 3) + " (" + worst_case +
              "), per coordinate " + fmt(worst_coordinate, 3) + ", " + fmt(secs, 3) + " s"};
}

// 2. Streaming AP against the brute-force oracle.
Outcome ap_oracle_equivalence() {
  const auto t0 = Clock::now();
  RandomSource rng(2024);
  int mismatches = 0;
  int corpora = 0;
  while (corpora < 50) {
    const std::size_t n = 2 + rng.index(199);
    const auto labels = awe::testing::random_labels(rng, n, 1 + rng.index(std::max<std::size_t>(1, n / 3)));
    std::set<std::string> distinct(labels.begin(), labels.end());
    if (distinct.size() == labels.size()) continue;  // AP undefined without a positive pair
    const auto emb = awe::testing::random_embeddings(rng, n, 1 + static_cast<int>(rng.index(16)));
    if (same_different_ap(emb, labels).ap != awe::testing::brute_force_ap(emb, labels)) ++mismatches;
    ++corpora;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          std::to_string(corpora) + " corpora, " + std::to_string(mismatches) + " mismatches, " + fmt(secs, 3) +
              " s"};
}

std::vector<Vec<double>> on_circle(std::initializer_list<double> degrees) {
  std::vector<Vec<double>> out;
  for (double d : degrees) {
    const double r = d * M_PI / 180.0;
    out.push_back(Vec<double>{{std::cos(r), std::sin(r)}});
  }
  return out;
}

// 3. Hand-built rankings.
Outcome hand_value_ap() {
  const std::vector<std::string> labels{"a", "a", "b", "b"};
  // Positives rank 1 and 3 (pair angles 10, 15, 20, 25, 35, 45 degrees).
  const double first = same_different_ap(on_circle({0, 10, 25, 45}), labels).ap;
  // Positives rank 2 and 4 (pair angles 10, 20, 30, 35, 45, 65 degrees).
  const double second = same_different_ap(on_circle({0, 20, -10, -45}), labels).ap;
  return {first == 5.0 / 6.0 && second == 0.5, "rank(1,3) AP " + fmt(first, 17) + ", rank(2,4) AP " + fmt(second, 17)};
}

// 4. Plateau heuristic on a scripted loss sequence.
Outcome plateau_schedule() {
  const auto t0 = Clock::now();
  PlateauSchedule schedule(0.1, {});
  const std::vector<double> losses{1.0, 0.9, 0.8, 0.7, 0.9, 0.9, 0.9};
  int drop_epoch = 0;
  std::string flags;
  for (std::size_t e = 0; e < losses.size(); ++e) {
    const auto step = schedule.observe(losses[e]);
    flags += step.plateau ? '1' : '0';
    if (step.decayed && drop_epoch == 0) drop_epoch = static_cast<int>(e + 1);
  }
  const bool dropped_right = drop_epoch == 7 && schedule.lr() == 0.1 / 10.0;
  PlateauSchedule constant(0.1, {});
  bool constant_triggered = false;
  for (int e = 0; e < 100; ++e) constant_triggered = constant_triggered || constant.observe(0.5).plateau;
  const double secs = seconds_since(t0);
  return {dropped_right && !constant_triggered && flags == "0000111" && secs < 1.0,
          "plateau flags " + flags + ", drop at epoch " + std::to_string(drop_epoch) + " lr " + fmt(schedule.lr()) +
              ", constant losses trigger: " + (constant_triggered ? "yes" : "no")};
}

Corpus labelled_corpus(std::size_t labels, std::size_t per_label) {
  Corpus c;
  for (std::size_t l = 0; l < labels; ++l) {
    for (std::size_t k = 0; k < per_label; ++k) c.segments.push_back({"w" + std::to_string(l), 1, 1, {0.0f}});
  }
  return c;
}

// 5. Negative sampling distribution.
Outcome sampling_correctness() {
  const Corpus corpus = labelled_corpus(3, 4);
  const LabelIndex index(corpus);
  RandomSource rng(99);

  SimilarityMatrix frozen(3);
  frozen.set(0, 0, 0.0);
  frozen.set(0, 1, 3.0);
  frozen.set(0, 2, 1.0);
  const int draws = 100000;
  std::vector<int> counts(3, 0);
  for (int k = 0; k < draws; ++k) {
    ++counts[index.label_of_segment(sample_negative(0, index, &frozen, SamplingMode::nonuniform, rng))];
  }
  const std::vector<double> pmf{0.0, 0.75, 0.25};
  double worst_sigma = 0.0;
  bool within = true;
  for (int j = 0; j < 3; ++j) {
    const double expected = pmf[j] * draws;
    const double sigma = std::sqrt(draws * pmf[j] * (1.0 - pmf[j]));
    const double dev = std::abs(counts[j] - expected);
    if (sigma == 0.0) {
      within = within && counts[j] == 0;
    } else {
      worst_sigma = std::max(worst_sigma, dev / sigma);
      within = within && dev <= 3.0 * sigma;
    }
  }

  const Corpus wide = labelled_corpus(5, 3);
  const LabelIndex wide_index(wide);
  SimilarityMatrix fresh(5);
  std::vector<int> uniform_counts(5, 0);
  for (int k = 0; k < draws; ++k) {
    ++uniform_counts[wide_index.label_of_segment(sample_negative(2, wide_index, &fresh, SamplingMode::nonuniform, rng))];
  }
  bool uniform_ok = uniform_counts[2] == 0;
  for (int j = 0; j < 5; ++j) {
    if (j == 2) continue;
    const double p = 0.25;
    uniform_ok = uniform_ok && std::abs(uniform_counts[j] - p * draws) <= 3.0 * std::sqrt(draws * p * (1 - p));
  }

  // Never the anchor's own label, across modes and randomly grown matrices.
  std::size_t own_label = 0;
  SimilarityMatrix grown(5);
  for (int k = 0; k < 1000000; ++k) {
    const std::size_t anchor = rng.index(5);
    if (k % 1000 == 0) {
      std::size_t other = rng.index(5);
      if (other != anchor) grown.stage(anchor, other, rng.uniform());
      grown.commit();
    }
    const auto mode = k % 2 == 0 ? SamplingMode::nonuniform : SamplingMode::uniform;
    own_label += wide_index.label_of_segment(sample_negative(anchor, wide_index, &grown, mode, rng)) == anchor;
  }
  return {within && uniform_ok && own_label == 0,
          "frozen row counts (" + std::to_string(counts[0]) + ", " + std::to_string(counts[1]) + ", " +
              std::to_string(counts[2]) + "), worst " + fmt(worst_sigma, 3) + " sigma; epoch-start uniform " +
              (uniform_ok ? "ok" : "off") + "; anchor label drawn " + std::to_string(own_label) + "/1000000"};
}

// 6. Mirrored minibatch structure.
Outcome mirrored_minibatch() {
  RandomSource rng(6);
  int bad = 0;
  for (int b = 0; b < 1000; ++b) {
    const Corpus corpus = labelled_corpus(2 + rng.index(8), 2 + rng.index(4));
    const LabelIndex index(corpus);
    auto pairs = enumerate_same_pairs(corpus);
    rng.shuffle(pairs.begin(), pairs.end());
    pairs.resize(std::min<std::size_t>(pairs.size(), 1 + rng.index(32)));
    SimilarityMatrix sim(index.num_labels());
    const auto batch = build_minibatch(pairs, index, &sim, SamplingMode::nonuniform, rng);
    bool ok = batch.size() == 2 * pairs.size();
    for (std::size_t k = 0; ok && k < pairs.size(); ++k) {
      const Triplet& t = batch[2 * k];
      const Triplet& m = batch[2 * k + 1];
      ok = t.anchor == pairs[k].first && t.same == pairs[k].second && m.anchor == t.same && m.same == t.anchor &&
           m.diff == t.diff && index.label_of_segment(t.diff) != index.label_of_segment(t.anchor);
    }
    bad += !ok;
  }
  return {bad == 0, "1000 batches, " + std::to_string(bad) + " malformed"};
}

struct PipelineRun {
  SynthCorpora data;
  TrainResult classifier;
  TrainResult siamese;
  std::string log_text;
  std::string ap_report;
};

PipelineRun run_pipeline(const SynthConfig& synth, const NetworkConfig& net, int classifier_epochs,
                         const SiameseTrainConfig& siamese_cfg, bool verbose) {
  PipelineRun run;
  run.data = synthesize_corpus(synth);
  ClassifierTrainConfig cc;
  cc.max_epochs = classifier_epochs;
  const auto t0 = Clock::now();
  run.classifier = train_classifier(run.data.train, run.data.dev, net, cc, [&](const EpochLog& l) {
    run.log_text += format_epoch_log(l);
    if (verbose) std::printf("    [%.0fs] classifier %s", seconds_since(t0), format_epoch_log(l).c_str());
  });
  run.siamese = train_siamese(run.data.train, run.data.dev, run.classifier.best, siamese_cfg, {},
                              [&](const EpochLog& l) {
                                run.log_text += format_epoch_log(l);
                                if (verbose) {
                                  std::printf("    [%.0fs] siamese %s", seconds_since(t0), format_epoch_log(l).c_str());
                                }
                              });
  const auto emb = compute_embeddings(run.siamese.best, run.data.dev.segments);
  const auto labels = labels_of(run.data.dev.segments);
  run.ap_report = format_ap_result(same_different_ap(emb, labels)) +
                  format_frequency_report(ap_by_frequency(emb, labels, run.data.train.vocabulary(),
                                                          default_frequency_thresholds()));
  return run;
}

NetworkConfig pilot_network() {
  NetworkConfig net;
  net.cell = CellKind::lstm;
  net.stacked_layers = 2;
  net.fc_layers = 2;
  net.hidden_dim = 64;
  net.fc_dim = 128;
  return net;
}

SiameseTrainConfig pilot_siamese() {
  SiameseTrainConfig cfg;
  cfg.embed_dim = 32;
  cfg.margin = 0.4;
  cfg.m_star = 0.6;
  cfg.sampling = SamplingMode::nonuniform;
  return cfg;
}

// 7 and 8 share one end-to-end run.
std::pair<Outcome, Outcome> end_to_end() {
  const auto t0 = Clock::now();
  const PipelineRun run = run_pipeline(SynthConfig{}, pilot_network(), 30, pilot_siamese(), true);
  const double secs = seconds_since(t0);
  const double cls_ap = run.classifier.best.dev_ap;
  const double sia_ap = run.siamese.best.dev_ap;
  Outcome seven{cls_ap >= 0.50 && sia_ap > cls_ap && secs < 600.0,
                "classifier dev AP " + fmt(cls_ap) + " (epoch " + std::to_string(run.classifier.best.epoch) +
                    "), siamese dev AP " + fmt(sia_ap) + " (epoch " + std::to_string(run.siamese.best.epoch) +
                    "), " + fmt(secs, 4) + " s"};

  std::set<std::string> seen;
  for (const auto& s : run.data.train.segments) seen.insert(s.label);
  const auto emb = compute_embeddings(run.siamese.best, run.data.dev.segments);
  const auto labels = labels_of(run.data.dev.segments);
  const auto in_vocab = ap_on_subset(emb, labels, [&](std::size_t i) { return seen.count(labels[i]) > 0; });
  const auto out_vocab = ap_on_subset(emb, labels, [&](std::size_t i) { return seen.count(labels[i]) == 0; });
  Outcome eight{in_vocab && out_vocab && in_vocab->ap > out_vocab->ap,
                "seen-word AP " + (in_vocab ? fmt(in_vocab->ap) : "n/a") + ", unseen-word AP " +
                    (out_vocab ? fmt(out_vocab->ap) : "n/a")};
  return {seven, eight};
}

// 9. Two identical runs, compared byte for byte.
Outcome determinism() {
  SynthConfig synth;
  synth.num_word_types = 8;
  synth.examples_per_type = 6;
  synth.dev_word_types = 6;
  synth.dev_examples_per_type = 4;
  synth.max_length = 80;
  NetworkConfig net = pilot_network();
  net.hidden_dim = 16;
  net.fc_dim = 24;
  SiameseTrainConfig sc = pilot_siamese();
  sc.embed_dim = 8;
  sc.max_epochs = 2;
  const PipelineRun a = run_pipeline(synth, net, 3, sc, false);
  const PipelineRun b = run_pipeline(synth, net, 3, sc, false);
  const bool archives = encode_archive(a.data.train) == encode_archive(b.data.train) &&
                        encode_archive(a.data.dev) == encode_archive(b.data.dev);
  const bool checkpoints = encode_checkpoint(a.classifier.best) == encode_checkpoint(b.classifier.best) &&
                           encode_checkpoint(a.siamese.best) == encode_checkpoint(b.siamese.best);
  const bool logs = a.log_text == b.log_text;
  const bool reports = a.ap_report == b.ap_report;
  return {archives && checkpoints && logs && reports,
          std::string("archives ") + (archives ? "identical" : "differ") + ", checkpoints " +
              (checkpoints ? "identical" : "differ") + ", logs " + (logs ? "identical" : "differ") +
              ", AP reports " + (reports ? "identical" : "differ")};
}

// 10. Scale and rotation invariance of AP; rescaling invariance of cos-hinge.
Outcome geometry_invariances() {
  RandomSource rng(10);
  double worst_ap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + rng.index(60);
    const int dim = 2 + static_cast<int>(rng.index(12));
    const auto labels = awe::testing::random_labels(rng, n, 1 + n / 4);
    auto emb = awe::testing::random_embeddings(rng, n, dim);
    Mat<double> g(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
    }
    const Mat<double> rotation = Eigen::HouseholderQR<Mat<double>>(g).householderQ();
    std::vector<Vec<double>> moved;
    for (const auto& e : emb) moved.push_back(3.7 * (rotation * e));
    std::set<std::string> distinct(labels.begin(), labels.end());
    if (distinct.size() == labels.size()) continue;
    const auto before = same_different_ap(emb, labels);
    const auto after = same_different_ap(moved, labels);
    worst_ap = std::max(worst_ap, std::abs(before.ap - after.ap));
    if (before.pr_curve.size() != after.pr_curve.size()) worst_ap = INFINITY;
    for (std::size_t k = 0; k < before.pr_curve.size() && k < after.pr_curve.size(); ++k) {
      worst_ap = std::max(worst_ap, std::abs(before.pr_curve[k].precision - after.pr_curve[k].precision));
      worst_ap = std::max(worst_ap, std::abs(before.pr_curve[k].recall - after.pr_curve[k].recall));
    }
  }
  double worst_hinge = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int dim = 1 + static_cast<int>(rng.index(32));
    const auto v = awe::testing::random_embeddings(rng, 3, dim);
    const double base = cos_hinge_loss(v[0], v[1], v[2], 0.4).loss;
    const double scaled = cos_hinge_loss<double>(v[0] * std::exp(rng.uniform(-5, 5)), v[1] * std::exp(rng.uniform(-5, 5)),
                                                 v[2] * std::exp(rng.uniform(-5, 5)), 0.4)
                              .loss;
    worst_hinge = std::max(worst_hinge, std::abs(base - scaled));
  }
  return {worst_ap <= 1e-6 && worst_hinge <= 1e-6,
          "max AP/PR change " + fmt(worst_ap, 3) + ", max cos-hinge change " + fmt(worst_hinge, 3)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > 10) {
      std::fprintf(stderr, "usage: awe_acceptance [criterion 1-10 ...]\n");
      return 2;
    }
    only.insert(k);
  }
  auto wanted = [&](int k) { return only.empty() || only.count(k) > 0; };

  int failures = 0;
  auto report = [&](int k, const char* name, const Outcome& o) {
    std::printf("%s  criterion %2d  %-32s %s\n", o.pass ? "PASS" : "FAIL", k, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };

  if (wanted(1)) report(1, "gradient correctness", gradient_correctness());
  if (wanted(2)) report(2, "AP oracle equivalence", ap_oracle_equivalence());
  if (wanted(3)) report(3, "hand-value AP", hand_value_ap());
  if (wanted(4)) report(4, "plateau schedule", plateau_schedule());
  if (wanted(5)) report(5, "negative sampling", sampling_correctness());
  if (wanted(6)) report(6, "mirrored minibatch", mirrored_minibatch());
  if (wanted(7) || wanted(8)) {
    const auto [seven, eight] = end_to_end();
    if (wanted(7)) report(7, "end-to-end synthetic regression", seven);
    if (wanted(8)) report(8, "seen vs unseen words", eight);
  }
  if (wanted(9)) report(9, "determinism", determinism());
  if (wanted(10)) report(10, "geometry invariances", geometry_invariances());

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
