#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "addrparse/pipeline.hpp"

namespace addrparse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

// Explicit --schema wins, then schema.txt beside the data, then the built-in one.
inline TagSchema resolve_schema(const std::string& flag, const fs::path& data_dir) {
  if (!flag.empty()) return TagSchema::parse(read_file(flag));
  if (!data_dir.empty() && fs::exists(data_dir / "schema.txt")) return TagSchema::parse(read_file(data_dir / "schema.txt"));
  return default_schema();
}

struct SplitFlags {
  std::string data_dir, train, validation, schema;
};

inline void add_split_flags(CLI::App* cmd, SplitFlags& f) {
  cmd->add_option("--data", f.data_dir, "Directory holding train.conll and validation.conll");
  cmd->add_option("--train", f.train, "Training CoNLL file (overrides --data)");
  cmd->add_option("--validation", f.validation, "Validation CoNLL file (overrides --data)");
  cmd->add_option("--schema", f.schema, "Schema file (default: <data>/schema.txt or built-in)");
}

inline std::pair<TagSchema, DatasetSplits> load_train_validation(const SplitFlags& f) {
  const fs::path dir = f.data_dir;
  const fs::path train = f.train.empty() ? dir / "train.conll" : fs::path(f.train);
  const fs::path val = f.validation.empty() ? dir / "validation.conll" : fs::path(f.validation);
  if (f.data_dir.empty() && (f.train.empty() || f.validation.empty())) {
    throw ConfigError("give --data or both --train and --validation");
  }
  TagSchema schema = resolve_schema(f.schema, f.data_dir.empty() ? fs::path(train).parent_path() : dir);
  DatasetSplits splits;
  splits.train = read_conll(train, schema);
  splits.validation = read_conll(val, schema);
  if (splits.train.empty() || splits.validation.empty()) throw ConfigError("train and validation files must be non-empty");
  return {std::move(schema), std::move(splits)};
}

}  // namespace detail

// Entry point shared by the binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Turkish address parsing toolkit: IOB tagging, head comparison, random search"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic corpus as train/validation/test CoNLL files");
  std::uint64_t gen_seed = 42, gen_split_seed = 0;
  long long gen_size = 1248;
  std::string gen_out, gen_schema;
  bool gen_split_seed_set = false;
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--size", gen_size, "Number of samples")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--split-seed", gen_split_seed, "Shuffle seed for splitting (default: --seed)")
      ->each([&](const std::string&) { gen_split_seed_set = true; });
  gen->add_option("--schema", gen_schema, "Schema file (default: built-in)");

  // train
  auto* tr = app.add_subcommand("train", "Train one model with fixed hyperparameters");
  detail::SplitFlags tr_data;
  detail::add_split_flags(tr, tr_data);
  std::string tr_variant = "base", tr_head = "mlp", tr_optimizer = "adamw", tr_runs = "runs", tr_trial = "manual";
  double tr_lr = 1e-3, tr_wd = 1e-4;
  int tr_batch = 32, tr_epochs = 10, tr_patience = 2;
  std::uint64_t tr_seed = 0;
  tr->add_option("--variant", tr_variant, "Encoder variant: small, distil, base")->capture_default_str();
  tr->add_option("--head", tr_head, "Head kind: linear or mlp")->capture_default_str();
  tr->add_option("--lr", tr_lr, "Initial learning rate")->capture_default_str();
  tr->add_option("--batch", tr_batch, "Batch size")->capture_default_str();
  tr->add_option("--optimizer", tr_optimizer, "adamw, rmsprop or sgd")->capture_default_str();
  tr->add_option("--wd", tr_wd, "Decoupled weight decay")->capture_default_str();
  tr->add_option("--epochs", tr_epochs, "Maximum epochs")->capture_default_str();
  tr->add_option("--patience", tr_patience, "Early-stopping patience")->capture_default_str();
  tr->add_option("--seed", tr_seed, "Seed for init, shuffling and dropout")->capture_default_str();
  tr->add_option("--runs", tr_runs, "Root directory for run artifacts")->capture_default_str();
  tr->add_option("--trial-id", tr_trial, "Run directory name under runs/<variant>/")->capture_default_str();

  // hpo
  auto* hp = app.add_subcommand("hpo", "Random-search hyperparameters for one variant and head");
  detail::SplitFlags hp_data;
  detail::add_split_flags(hp, hp_data);
  std::string hp_variant = "base", hp_head = "mlp", hp_runs = "runs", hp_sampling = "log";
  int hp_trials = 40, hp_epochs = 10, hp_patience = 2;
  unsigned hp_threads = 0;
  std::uint64_t hp_seed = 1;
  hp->add_option("--variant", hp_variant, "Encoder variant: small, distil, base")->capture_default_str();
  hp->add_option("--head", hp_head, "Head kind: linear or mlp")->capture_default_str();
  hp->add_option("--trials", hp_trials, "Number of trials")->capture_default_str();
  hp->add_option("--master-seed", hp_seed, "Study seed")->capture_default_str();
  hp->add_option("--epochs", hp_epochs, "Maximum epochs per trial")->capture_default_str();
  hp->add_option("--patience", hp_patience, "Early-stopping patience")->capture_default_str();
  hp->add_option("--threads", hp_threads, "Worker threads (0: all cores)")->capture_default_str();
  hp->add_option("--lr-sampling", hp_sampling, "log or linear")->capture_default_str();
  hp->add_option("--runs", hp_runs, "Root directory for run artifacts")->capture_default_str();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score predictions against gold tags");
  std::string ev_gold, ev_pred, ev_model, ev_vocab, ev_data, ev_out, ev_pred_out, ev_reps_out, ev_schema;
  ev->add_option("--gold", ev_gold, "Gold CoNLL file");
  ev->add_option("--pred", ev_pred, "Predicted CoNLL file (same tokens as --gold)");
  ev->add_option("--model", ev_model, "Checkpoint to run on --data");
  ev->add_option("--vocab", ev_vocab, "Vocabulary file (default: vocab.tsv beside the checkpoint)");
  ev->add_option("--data", ev_data, "Held-out CoNLL file for --model");
  ev->add_option("--out", ev_out, "Directory for report.csv and report.md (default: print markdown)");
  ev->add_option("--pred-out", ev_pred_out, "Write model predictions as CoNLL");
  ev->add_option("--reps-out", ev_reps_out, "Write token representations as CSV");
  ev->add_option("--schema", ev_schema, "Schema file for --gold/--pred (default: built-in)");

  // compare
  auto* cmp = app.add_subcommand("compare", "Run the full variant x head comparison from a manifest");
  std::string cmp_manifest;
  cmp->add_option("--manifest", cmp_manifest, "Experiment manifest")->required();

  // plot
  auto* pl = app.add_subcommand("plot", "Render SVG charts");
  std::string pl_hist, pl_table, pl_reps, pl_out, pl_schema;
  pl->add_option("--hist", pl_hist, "CoNLL file: label frequency bar chart");
  pl->add_option("--table", pl_table, "comparison.csv: LINEAR vs MLP per-token accuracy");
  pl->add_option("--reps", pl_reps, "representations.csv: PCA scatter");
  pl->add_option("--out", pl_out, "Output SVG path")->required();
  pl->add_option("--schema", pl_schema, "Schema file (default: built-in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*gen) {
      const TagSchema schema = gen_schema.empty() ? default_schema() : TagSchema::parse(read_file(gen_schema));
      const auto samples = generate_dataset(gen_seed, gen_size, schema);
      const auto splits = split_dataset(samples, gen_split_seed_set ? gen_split_seed : gen_seed);
      write_split_files(gen_out, splits, schema);
      out << "wrote " << splits.train.size() << "/" << splits.validation.size() << "/" << splits.test.size()
          << " samples to " << gen_out << "\n";
    } else if (*tr) {
      const auto [schema, splits] = detail::load_train_validation(tr_data);
      const Vocabulary vocab = Vocabulary::build(splits.train, 1);
      HeadConfig hc;
      hc.kind = parse_head_kind(tr_head);
      TrainConfig tc;
      tc.max_epochs = tr_epochs;
      tc.patience = tr_patience;
      tc.trial = {tr_lr, tr_batch, parse_optimizer_kind(tr_optimizer), tr_wd, tr_seed};
      ModelBundle m = init_model(variant(tr_variant), hc, schema, vocab, derive_seed(tr_seed, 0x1a17));
      TrainResult result = train(std::move(m), splits, vocab, schema, tc);
      const fs::path run_dir = fs::path(tr_runs) / run_name(tr_variant, hc.kind) / tr_trial;
      write_run(run_dir, result.model, result.log, vocab, schema, result.optimizer);
      out << "best epoch " << result.log.best_epoch << " of " << result.log.stopped_epoch << ", val loss "
          << result.log.best_val_loss << "\ncheckpoint " << (run_dir / "best.ckpt").string() << "\n";
    } else if (*hp) {
      const auto [schema, splits] = detail::load_train_validation(hp_data);
      const Vocabulary vocab = Vocabulary::build(splits.train, 1);
      if (hp_sampling != "log" && hp_sampling != "linear") throw ConfigError("--lr-sampling must be log or linear");
      StudyConfig sc;
      sc.encoder = variant(hp_variant);
      sc.head.kind = parse_head_kind(hp_head);
      sc.space.log_uniform_lr = hp_sampling == "log";
      sc.n_trials = hp_trials;
      sc.master_seed = hp_seed;
      sc.max_epochs = hp_epochs;
      sc.patience = hp_patience;
      sc.threads = hp_threads;
      const StudyResult sr = run_study(sc, splits, vocab, schema);
      const fs::path dir = fs::path(hp_runs) / run_name(hp_variant, sc.head.kind);
      write_file(dir / "study.csv", sr.to_csv());
      const auto& best = sr.trials[*sr.best_trial];
      write_run(dir / ("trial-" + std::to_string(best.index)), *sr.best_model, best.log, vocab, schema);
      out << "best trial " << best.index << ": lr " << best.config.learning_rate << ", batch " << best.config.batch_size
          << ", " << to_string(best.config.optimizer) << ", wd " << best.config.weight_decay << ", val loss "
          << best.best_val_loss << "\nstudy log " << (dir / "study.csv").string() << "\n";
    } else if (*ev) {
      EvalReport report;
      std::string name = "model";
      TagSchema schema = default_schema();
      if (!ev_model.empty()) {
        if (ev_data.empty()) throw ConfigError("--model needs --data");
        refuse_train_split(ev_data);
        const Checkpoint ck = load_checkpoint(ev_model);
        schema = TagSchema::parse(ck.schema_text);
        const fs::path vocab_path = ev_vocab.empty() ? fs::path(ev_model).parent_path() / "vocab.tsv" : fs::path(ev_vocab);
        const Vocabulary vocab = Vocabulary::parse(read_file(vocab_path));
        if (vocab.fingerprint() != ck.vocab_fingerprint) throw FormatError("vocabulary does not match the checkpoint");
        const auto samples = read_conll(ev_data, schema);
        if (samples.empty()) throw EmptyEval("no samples in " + ev_data);
        const auto pred = predict_tags(ck.model, samples, vocab, schema);
        report = evaluate(gold_tags(samples), pred, schema);
        name = ck.model.encoder.variant_name + "_" + to_string(ck.model.head.kind);
        if (!ev_pred_out.empty()) {
          std::vector<AddressSample> predicted = samples;
          for (std::size_t i = 0; i < predicted.size(); ++i) predicted[i].tags = pred[i];
          write_file(ev_pred_out, write_conll(predicted, schema));
        }
        if (!ev_reps_out.empty()) {
          write_file(ev_reps_out, representations_csv(export_representations(ck.model, samples, vocab, schema), schema));
        }
      } else {
        if (ev_gold.empty() || ev_pred.empty()) throw ConfigError("give --gold and --pred, or --model and --data");
        if (!ev_schema.empty()) schema = TagSchema::parse(read_file(ev_schema));
        refuse_train_split(ev_gold);
        const auto gold = read_conll(ev_gold, schema);
        const auto pred = read_conll(ev_pred, schema, ConllCheck::kTagsOnly);
        if (gold.size() != pred.size()) throw AlignmentError("gold and prediction sample counts differ");
        for (std::size_t i = 0; i < gold.size(); ++i) {
          if (gold[i].tokens != pred[i].tokens) throw AlignmentError("sample " + std::to_string(i) + " tokens differ");
        }
        report = evaluate(gold_tags(gold), gold_tags(pred), schema);
      }
      if (ev_out.empty()) {
        out << report_markdown(name, report);
      } else {
        write_file(fs::path(ev_out) / "report.csv", report_csv(report, schema));
        write_file(fs::path(ev_out) / "report.md", report_markdown(name, report));
        out << report_markdown(name, report);
      }
    } else if (*cmp) {
      const fs::path manifest_path = cmp_manifest;
      const auto manifest = ExperimentManifest::parse(read_file(manifest_path), manifest_path.parent_path());
      const ComparisonTable table = run_comparison(manifest, err);
      out << table.to_markdown();
      try {
        out << "\n" << head_observations(table);
      } catch (const PairingError&) {
      }
    } else if (*pl) {
      const int chosen = !pl_hist.empty() + !pl_table.empty() + !pl_reps.empty();
      if (chosen != 1) throw ConfigError("give exactly one of --hist, --table, --reps");
      const TagSchema schema = pl_schema.empty() ? default_schema() : TagSchema::parse(read_file(pl_schema));
      std::string svg_text;
      if (!pl_hist.empty()) {
        svg_text = plot_label_histogram(label_histogram(read_conll(pl_hist, schema)), schema);
      } else if (!pl_table.empty()) {
        svg_text = plot_head_comparison(ComparisonTable::parse_csv(read_file(pl_table)));
      } else {
        const Representations reps = parse_representations_csv(read_file(pl_reps), schema);
        svg_text = plot_pca(pca_projection(reps.vectors), reps.gold, schema);
      }
      write_file(pl_out, svg_text);
      out << "wrote " << pl_out << "\n";
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace addrparse::cli
