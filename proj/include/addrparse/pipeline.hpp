#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "addrparse/checkpoint.hpp"
#include "addrparse/conll.hpp"
#include "addrparse/generator.hpp"
#include "addrparse/hpo.hpp"
#include "addrparse/manifest.hpp"
#include "addrparse/metrics.hpp"
#include "addrparse/report.hpp"

namespace addrparse {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline TagSchema load_schema(const std::optional<fs::path>& path) {
  return path ? TagSchema::parse(read_file(*path)) : default_schema();
}

inline std::vector<AddressSample> read_conll(const fs::path& path, const TagSchema& schema,
                                             ConllCheck check = ConllCheck::kStrict) {
  return parse_conll(read_file(path), schema, check);
}

inline constexpr const char* kLineageFile = "lineage.txt";

// Refuses a data file that a sibling lineage.txt records as the training split.
inline void refuse_train_split(const fs::path& data_file) {
  const fs::path lineage = data_file.parent_path() / kLineageFile;
  if (!fs::exists(lineage)) return;
  const auto kv = KeyValueFile::parse(read_file(lineage));
  if (const auto train = kv.get("", "train")) {
    if (data_file.filename() == fs::path(*train).filename()) {
      throw LineageError(data_file.string() + " is the training split; evaluation needs held-out data");
    }
  }
}

inline std::string histogram_csv(const std::map<TagId, std::size_t>& hist, const TagSchema& schema) {
  std::string out = "tag,count\n";
  for (std::size_t t = 0; t < schema.num_tags(); ++t) {
    const auto it = hist.find(static_cast<TagId>(t));
    out += schema.tag_names()[t] + "," + std::to_string(it == hist.end() ? 0 : it->second) + "\n";
  }
  return out;
}

// Writes train/validation/test CoNLL files, the schema, a lineage record and
// the full-corpus label histogram.
inline void write_split_files(const fs::path& dir, const DatasetSplits& splits, const TagSchema& schema) {
  write_file(dir / "train.conll", write_conll(splits.train, schema));
  write_file(dir / "validation.conll", write_conll(splits.validation, schema));
  write_file(dir / "test.conll", write_conll(splits.test, schema));
  write_file(dir / "schema.txt", schema.to_text());
  write_file(dir / kLineageFile, "train = train.conll\nvalidation = validation.conll\ntest = test.conll\n");
  std::vector<AddressSample> all = splits.train;
  all.insert(all.end(), splits.validation.begin(), splits.validation.end());
  all.insert(all.end(), splits.test.begin(), splits.test.end());
  write_file(dir / "histogram.csv", histogram_csv(label_histogram(all), schema));
}

inline DatasetSplits materialize_splits(const ExperimentManifest& m, const TagSchema& schema) {
  if (m.train_path) {
    return {read_conll(*m.train_path, schema), read_conll(*m.validation_path, schema), read_conll(*m.test_path, schema)};
  }
  return split_dataset(generate_dataset(m.generator_seed, m.generator_size, schema), m.split_seed);
}

inline std::string run_name(const std::string& variant_name, HeadKind head) {
  return variant_name + "_" + (head == HeadKind::kLinear ? "linear" : "mlp");
}

inline void write_run(const fs::path& run_dir, const ModelBundle& model, const TrainLog& log, const Vocabulary& vocab,
                      const TagSchema& schema, const std::optional<Optimizer>& opt = std::nullopt) {
  write_file(run_dir / "vocab.tsv", vocab.to_text());
  write_file(run_dir / "train_log.csv", log.to_csv());
  save_checkpoint((run_dir / "best.ckpt").string(), Checkpoint{model, vocab.fingerprint(), schema.to_text(), opt});
}

inline TagSequences gold_tags(const std::vector<AddressSample>& samples) {
  TagSequences out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.tags);
  return out;
}

inline std::string report_markdown(const std::string& name, const EvalReport& r) {
  const ComparisonRow row = comparison_row(name, HeadKind::kLinear, r);
  char buf[256];
  std::snprintf(buf, sizeof buf, "| %s | %.3f | %.3f | %.3f | %.3f | %.3f |\n", name.c_str(), row.macro_precision,
                row.macro_recall, row.macro_f1, row.sample_accuracy, row.token_accuracy);
  return "| Model | Precision (macro) | Recall (macro) | F1 (macro) | Accuracy (Per Sample) | Accuracy (Per Token) |\n"
         "|---|---|---|---|---|---|\n" + std::string(buf);
}

// Runs a study per (variant, head), evaluates each best trial on the test
// split and writes every artifact under the manifest's output directory.
inline ComparisonTable run_comparison(const ExperimentManifest& m, std::ostream& log) {
  m.check_paths();
  const TagSchema schema = load_schema(m.schema_path);
  const DatasetSplits splits = materialize_splits(m, schema);
  const fs::path out = m.output_dir;
  write_split_files(out / "data", splits, schema);
  {
    std::vector<AddressSample> all = splits.train;
    all.insert(all.end(), splits.validation.begin(), splits.validation.end());
    all.insert(all.end(), splits.test.begin(), splits.test.end());
    write_file(out / "label_histogram.svg", plot_label_histogram(label_histogram(all), schema));
  }
  const Vocabulary vocab = Vocabulary::build(splits.train, 1);
  const TagSequences gold = gold_tags(splits.test);

  ComparisonTable table;
  for (const auto& v : m.variants) {
    for (HeadKind head : m.heads) {
      const std::string name = run_name(v, head);
      log << "[" << name << "] " << m.n_trials << " trials\n" << std::flush;
      StudyConfig sc;
      sc.encoder = variant(v);
      sc.head.kind = head;
      sc.space = m.space;
      sc.n_trials = m.n_trials;
      sc.master_seed = m.master_seed;
      sc.max_epochs = m.max_epochs;
      sc.patience = m.patience;
      sc.threads = m.threads;
      const StudyResult sr = run_study(sc, splits, vocab, schema);
      const fs::path run_dir = out / "runs" / name;
      write_file(run_dir / "study.csv", sr.to_csv());
      const auto& best = sr.trials[*sr.best_trial];
      write_run(run_dir / ("trial-" + std::to_string(best.index)), *sr.best_model, best.log, vocab, schema);

      const auto pred = predict_tags(*sr.best_model, splits.test, vocab, schema);
      const EvalReport report = evaluate(gold, pred, schema);
      write_file(run_dir / "report.csv", report_csv(report, schema));
      write_file(run_dir / "report.md", report_markdown(name, report));
      const Representations reps = export_representations(*sr.best_model, splits.test, vocab, schema);
      write_file(run_dir / "representations.csv", representations_csv(reps, schema));
      write_file(run_dir / "pca.svg", plot_pca(pca_projection(reps.vectors), reps.gold, schema));
      table.rows.push_back(comparison_row(v, head, report));
      log << "[" << name << "] best trial " << best.index << " val_loss " << best.best_val_loss << " token_acc "
          << report.token_accuracy / 100.0 << "\n" << std::flush;
    }
  }
  write_file(out / "comparison.md", table.to_markdown());
  write_file(out / "comparison.csv", table.to_csv());
  bool paired = true;
  try {
    head_pairs(table);
  } catch (const PairingError&) {
    paired = false;
  }
  if (paired) {
    write_file(out / "head_comparison.svg", plot_head_comparison(table));
    write_file(out / "observations.txt", head_observations(table));
  }
  return table;
}

}  // namespace addrparse
