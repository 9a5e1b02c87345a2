// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// gsrtr: data generation, training, prediction, evaluation, retrieval and
// attention export from one binary.
//
// Exit codes: 0 success, 1 usage, 2 validation, 3 runtime.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gsr/errors.hpp"
#include "gsr/evaluator.hpp"
#include "gsr/model.hpp"
#include "gsr/ontology.hpp"
#include "gsr/prediction.hpp"
#include "gsr/retrieval.hpp"
#include "gsr/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Options whose value is copied into a config field only when given on the
// command line, so flags override a --config file.
class Overrides {
 public:
  template <class T>
  void option(CLI::App* app, const std::string& name, T& target, const std::string& help) {
    auto holder = std::make_shared<T>(target);
    CLI::Option* o = app->add_option(name, *holder, help)->capture_default_str();
    apply_.push_back([o, holder, &target] {
      if (o->count() > 0) target = *holder;
    });
  }
  void flag(CLI::App* app, const std::string& name, bool& target, bool value, const std::string& help) {
    CLI::Option* o = app->add_flag(name, help);
    apply_.push_back([o, &target, value] {
      if (o->count() > 0) target = value;
    });
  }
  void apply() const {
    for (const auto& f : apply_) f();
  }

 private:
  std::vector<std::function<void()>> apply_;
};

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw gsr::IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw gsr::IoError("cannot write " + path.string());
  os << text;
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw gsr::ValidationError(path.string() + ": " + e.what());
  }
}

// Feature grids for a dataset. Each annotation names its container, relative to
// the dataset file; `fallback` is used for annotations that name none.
std::vector<gsr::FeatureGrid> load_grids(const std::vector<gsr::SituationAnnotation>& annotations,
                                         const fs::path& dataset, const fs::path& fallback) {
  std::map<fs::path, std::map<std::string, gsr::FeatureGrid>> containers;
  std::vector<gsr::FeatureGrid> out;
  for (const auto& a : annotations) {
    fs::path file = fallback;
    if (a.features) file = dataset.parent_path() / *a.features;
    if (file.empty()) throw gsr::ValidationError(a.image_id + ": no feature container (use --features)");
    auto it = containers.find(file);
    if (it == containers.end()) it = containers.emplace(file, gsr::load_feature_grids(file)).first;
    const auto g = it->second.find(a.image_id);
    if (g == it->second.end()) throw gsr::ValidationError(file.string() + ": no features for image " + a.image_id);
    out.push_back(g->second);
  }
  return out;
}

struct Paths {
  std::string space, dataset, features, checkpoint, out, predictions;
};

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string out_dir;
  std::string space;
  std::uint64_t seed = 0;
  std::size_t images = 64;
  gsr::SyntheticSpaceOptions space_options;
  gsr::SyntheticOptions data;
};

int cmd_gen_data(const GenDataArgs& args) {
  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  gsr::FrameSpace space;
  if (!args.space.empty()) {
    space = gsr::load_frame_space(args.space);
  } else {
    space = gsr::make_synthetic_space(args.space_options);
  }
  auto samples = gsr::generate_synthetic(space, args.images, args.data, args.seed);
  std::vector<gsr::SituationAnnotation> annotations;
  std::vector<std::pair<std::string, gsr::FeatureGrid>> grids;
  for (auto& s : samples) {
    s.annotation.features = "features.gsr";
    annotations.push_back(s.annotation);
    grids.emplace_back(s.annotation.image_id, std::move(s.grid));
  }
  gsr::save_frame_space(space, dir / "space.json");
  gsr::save_dataset(annotations, dir / "dataset.jsonl");
  gsr::save_feature_grids(dir / "features.gsr", grids);
  std::printf("wrote %zu images (%zu verbs, %zu roles, %zu nouns) to %s\n", annotations.size(), space.num_verbs(),
              space.num_roles(), space.num_nouns(), dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  Paths paths;
  std::string config;
  std::string log;
  std::uint64_t seed = 0;
  gsr::ModelConfig model;
  gsr::TrainOptions train;
};

gsr::TrainOptions train_options_from_json(const json& j, gsr::TrainOptions t) {
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::remove_reference_t<decltype(field)>>();
  };
  read("epochs", t.epochs);
  read("max_steps", t.max_steps);
  read("batch_size", t.batch_size);
  read("lr", t.optimizer.lr);
  read("backbone_lr", t.optimizer.backbone_lr);
  read("weight_decay", t.optimizer.weight_decay);
  read("beta1", t.optimizer.beta1);
  read("beta2", t.optimizer.beta2);
  read("clip", t.optimizer.clip);
  read("lr_decay", t.lr_decay);
  read("lr_decay_epochs", t.lr_decay_epochs);
  read("checkpoint_every", t.checkpoint_every);
  return t;
}

int cmd_train(TrainArgs& args, const Overrides& overrides, bool seed_given) {
  if (!args.config.empty()) {
    const json j = read_json(args.config);
    if (j.contains("model")) args.model = gsr::ModelConfig::from_json(j["model"].dump());
    if (j.contains("train")) args.train = train_options_from_json(j["train"], args.train);
    if (j.contains("seed") && !seed_given) {
      args.seed = j["seed"].get<std::uint64_t>();
      seed_given = true;
    }
  }
  if (!seed_given) throw gsr::ValidationError("train: --seed is required (or \"seed\" in --config)");
  overrides.apply();
  const gsr::FrameSpace space = gsr::load_frame_space(args.paths.space);
  const auto annotations = gsr::load_dataset(args.paths.dataset, space);
  const auto grids = load_grids(annotations, args.paths.dataset, args.paths.features);
  if (!grids.empty()) {
    args.model.channels = grids.front().channels;
    args.model.grid_h = grids.front().height;
    args.model.grid_w = grids.front().width;
  }
  gsr::Rng seeds(args.seed);
  const std::uint64_t init_seed = seeds.next_u64();
  args.train.seed = seeds.next_u64();
  gsr::Model model(args.model, space, init_seed);
  args.train.log_path = args.log;
  const fs::path out(args.paths.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  if (args.train.checkpoint_dir.empty() && out.has_parent_path()) args.train.checkpoint_dir = out.parent_path() / "epochs";

  std::printf("training %zu parameters on %zu images\n", gsr::count_parameters(model), annotations.size());
  const auto result = gsr::train(model, annotations, grids, space, args.train, [](const gsr::StepRecord& r) {
    if (r.step % 50 == 0) std::printf("step %zu epoch %zu loss %.6f\n", r.step, r.epoch, r.total);
  });
  json state{{"seed", args.seed}, {"steps", result.steps.size()}, {"epochs", result.epochs.size()}};
  model.save(out, state.dump());
  const auto& last = result.steps.back();
  std::printf("done: %zu steps, final loss %.6f, checkpoint %s\n", last.step, last.total, out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  Paths paths;
  std::size_t top_k = 5;
  std::size_t workers = 1;
};

int cmd_predict(const PredictArgs& args) {
  const gsr::FrameSpace space = gsr::load_frame_space(args.paths.space);
  const auto annotations = gsr::load_dataset(args.paths.dataset, space);
  const auto grids = load_grids(annotations, args.paths.dataset, args.paths.features);
  const gsr::Model model = gsr::Model::load(args.paths.checkpoint);
  if (model.config().num_verbs != space.num_verbs() || model.config().num_roles != space.num_roles() ||
      model.config().num_nouns != space.num_nouns()) {
    throw gsr::ValidationError("checkpoint vocabulary does not match " + args.paths.space);
  }
  const std::size_t k = std::min(args.top_k, space.num_verbs());
  std::vector<gsr::PredictionRecord> records(annotations.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(args.workers, annotations.size()));
  std::vector<std::exception_ptr> errors(workers);
  auto run = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < annotations.size(); i += workers) {
        const auto& a = annotations[i];
        records[i] = gsr::infer_topk(a.image_id, grids[i], a.width, a.height, space, model, k, space.verb_index(a.verb));
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(run, w);
  run(0);
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  const fs::path out(args.paths.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  gsr::save_predictions(records, out);
  std::printf("wrote %zu prediction records to %s\n", records.size(), out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  Paths paths;
  std::string report;
  bool per_verb = false;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const gsr::FrameSpace space = gsr::load_frame_space(args.paths.space);
  const auto annotations = gsr::load_dataset(args.paths.dataset, space);
  const auto records = gsr::load_predictions(args.paths.predictions, space);
  const gsr::MetricsReport report = gsr::evaluate(annotations, records, space);
  if (!args.report.empty()) write_text(args.report, report.to_json() + "\n");
  std::printf("%zu images, %zu verbs\n%s", report.images, report.per_verb.size(), report.to_table().c_str());
  if (args.per_verb) {
    for (const auto& v : report.per_verb) {
      std::printf("%-20s n=%-4zu top-1 verb %6.2f value %6.2f grnd-value %6.2f\n", v.verb.c_str(), v.images,
                  v.top1.verb.value_or(0.0), v.top1.value, v.top1.grounded_value);
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct RetrieveArgs {
  Paths paths;
  std::string corpus;
  std::string probe;
  std::size_t k = 10;
  std::string json_out;
};

int cmd_retrieve(const RetrieveArgs& args) {
  const gsr::FrameSpace space = gsr::load_frame_space(args.paths.space);
  auto corpus = gsr::load_predictions(args.corpus, space);
  const std::vector<gsr::PredictionRecord> probes =
      args.paths.predictions.empty() ? corpus : gsr::load_predictions(args.paths.predictions, space);
  const gsr::PredictionRecord* probe = nullptr;
  for (const auto& r : probes) {
    if (r.image_id == args.probe) probe = &r;
  }
  if (probe == nullptr) throw gsr::ValidationError("probe image '" + args.probe + "' has no prediction record");
  const gsr::RetrievalIndex index = gsr::build_index(std::move(corpus));
  const auto hits = index.query(*probe, args.k);
  std::printf("%-5s %-24s %s\n", "rank", "image_id", "score");
  json out = json::array();
  for (std::size_t i = 0; i < hits.size(); ++i) {
    std::printf("%-5zu %-24s %.6f\n", i + 1, hits[i].image_id.c_str(), hits[i].score);
    out.push_back(json{{"rank", i + 1}, {"image_id", hits[i].image_id}, {"score", hits[i].score}});
  }
  if (!args.json_out.empty()) write_text(args.json_out, json{{"probe", args.probe}, {"hits", out}}.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct AttentionArgs {
  Paths paths;
  std::string image;
  std::string verb;
};

int cmd_dump_attention(const AttentionArgs& args) {
  const gsr::FrameSpace space = gsr::load_frame_space(args.paths.space);
  const auto annotations = gsr::load_dataset(args.paths.dataset, space);
  std::vector<gsr::SituationAnnotation> chosen;
  for (const auto& a : annotations) {
    if (a.image_id == args.image) chosen.push_back(a);
  }
  if (chosen.empty()) throw gsr::ValidationError("image '" + args.image + "' is not in " + args.paths.dataset);
  const auto grids = load_grids(chosen, args.paths.dataset, args.paths.features);
  const gsr::Model model = gsr::Model::load(args.paths.checkpoint);
  std::size_t verb = 0;
  if (args.verb.empty()) {
    verb = gsr::infer(grids[0], chosen[0].width, chosen[0].height, space, model).verb;
  } else {
    const auto v = space.find_verb(args.verb);
    if (!v) throw gsr::ValidationError("verb '" + args.verb + "' not in space");
    verb = *v;
  }
  const auto trace = gsr::extract_attention(grids[0], verb, space, model);
  gsr::write_attention_trace(trace, args.paths.out);
  std::printf("wrote %zu attention maps for %s (verb %s) to %s\n", trace.maps.size(), args.image.c_str(),
              space.verb_name(verb).c_str(), args.paths.out.c_str());
  return 0;
}

void add_model_options(CLI::App* app, gsr::ModelConfig& m, Overrides& o) {
  o.option(app, "--d", m.d, "Transformer width");
  o.option(app, "--d-verb", m.d_verb, "Verb part of a role query (0 disables verb embeddings)");
  o.option(app, "--d-role", m.d_role, "Role part of a role query");
  o.option(app, "--heads", m.heads, "Attention heads");
  o.option(app, "--encoder-layers", m.encoder_layers, "Encoder layers");
  o.option(app, "--decoder-layers", m.decoder_layers, "Decoder layers");
  o.option(app, "--ffn-dim", m.ffn_dim, "Feed-forward inner width");
  o.option(app, "--head-hidden", m.head_hidden, "Head MLP hidden width (0: 2d)");
  o.option(app, "--backbone-layers", m.backbone_layers, "Pointwise backbone layers on the input features");
  o.option(app, "--dropout", m.dropout.transformer, "Dropout inside transformer blocks");
  o.option(app, "--verb-dropout", m.dropout.verb_head, "Verb classifier dropout");
  o.option(app, "--noun-dropout", m.dropout.noun_head, "Noun classifier dropout");
  o.option(app, "--exist-dropout", m.dropout.exist_head, "Box existence head dropout");
  o.option(app, "--box-dropout", m.dropout.box_head, "Box regressor dropout");
  o.option(app, "--verb-smoothing", m.smoothing.verb, "Verb label smoothing");
  o.option(app, "--noun-smoothing", m.smoothing.noun, "Noun label smoothing");
  o.flag(app, "--post-ln", m.pre_ln, false, "Post-LN residual blocks");
  o.flag(app, "--per-layer-pos", m.per_layer_pos, true, "One positional table per layer");
  o.flag(app, "--full-pos-table", m.full_pos_table, true, "One positional vector per grid cell");
}

void add_train_options(CLI::App* app, gsr::TrainOptions& t, Overrides& o) {
  o.option(app, "--epochs", t.epochs, "Epochs (0: until --max-steps)");
  o.option(app, "--max-steps", t.max_steps, "Stop after this many steps (0: no limit)");
  o.option(app, "--batch-size", t.batch_size, "Images per step");
  o.option(app, "--lr", t.optimizer.lr, "Learning rate");
  o.option(app, "--backbone-lr", t.optimizer.backbone_lr, "Backbone learning rate");
  o.option(app, "--weight-decay", t.optimizer.weight_decay, "AdamW weight decay");
  o.option(app, "--clip", t.optimizer.clip, "Global gradient norm limit (0 disables)");
  o.option(app, "--lr-decay", t.lr_decay, "Step decay factor");
  o.option(app, "--lr-decay-epochs", t.lr_decay_epochs, "Epochs between decays (0: constant)");
  o.option(app, "--checkpoint-every", t.checkpoint_every, "Epochs between checkpoints");
  o.flag(app, "--keep-checkpoints", t.keep_all_checkpoints, true, "Keep every epoch checkpoint, not only the latest");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grounded situation recognition transformer"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic space, dataset and feature grids");
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed")->required();
  gen_cmd->add_option("--space", gen.space, "Reuse an existing space.json");
  gen_cmd->add_option("--images", gen.images, "Number of images")->capture_default_str();
  gen_cmd->add_option("--verbs", gen.space_options.num_verbs, "Verbs")->capture_default_str();
  gen_cmd->add_option("--roles", gen.space_options.num_roles, "Roles")->capture_default_str();
  gen_cmd->add_option("--nouns", gen.space_options.num_nouns, "Nouns besides the unknown noun")->capture_default_str();
  gen_cmd->add_option("--min-frame", gen.space_options.min_frame, "Smallest frame")->capture_default_str();
  gen_cmd->add_option("--max-frame", gen.space_options.max_frame, "Largest frame")->capture_default_str();
  gen_cmd->add_option("--space-seed", gen.space_options.seed, "Space seed")->capture_default_str();
  gen_cmd->add_option("--channels", gen.data.channels, "Feature channels")->capture_default_str();
  gen_cmd->add_option("--grid-h", gen.data.height, "Grid rows")->capture_default_str();
  gen_cmd->add_option("--grid-w", gen.data.width, "Grid columns")->capture_default_str();
  gen_cmd->add_option("--noise", gen.data.noise, "Feature noise")->capture_default_str();
  gen_cmd->add_option("--absent-fraction", gen.data.absent_box_fraction, "Share of ungrounded roles")
      ->capture_default_str();

  TrainArgs tr;
  Overrides train_overrides;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--space", tr.paths.space, "space.json")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--dataset", tr.paths.dataset, "dataset.jsonl")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--features", tr.paths.features, "Feature container for annotations without one");
  train_cmd->add_option("--out", tr.paths.out, "Checkpoint path")->required();
  train_cmd->add_option("--config", tr.config, "JSON config {model, train, seed}; flags win")->check(CLI::ExistingFile);
  train_cmd->add_option("--log", tr.log, "Step log (JSON lines)");
  auto* seed_opt = train_cmd->add_option("--seed", tr.seed, "Seed for initialization, shuffling and dropout");
  add_model_options(train_cmd, tr.model, train_overrides);
  add_train_options(train_cmd, tr.train, train_overrides);

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Write top-k grounded predictions");
  predict_cmd->add_option("--space", pr.paths.space, "space.json")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--dataset", pr.paths.dataset, "dataset.jsonl")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--features", pr.paths.features, "Feature container for annotations without one");
  predict_cmd->add_option("--checkpoint", pr.paths.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--out", pr.paths.out, "predictions.jsonl")->required();
  predict_cmd->add_option("--top-k", pr.top_k, "Verbs per image")->capture_default_str();
  predict_cmd->add_option("--workers", pr.workers, "Threads")->capture_default_str();

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against a dataset");
  eval_cmd->add_option("--space", ev.paths.space, "space.json")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--dataset", ev.paths.dataset, "dataset.jsonl")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--predictions", ev.paths.predictions, "predictions.jsonl")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--report", ev.report, "Report JSON path");
  eval_cmd->add_flag("--per-verb", ev.per_verb, "Print per-verb rows");

  RetrieveArgs re;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Rank corpus images by grounded situation similarity");
  retrieve_cmd->add_option("--space", re.paths.space, "space.json")->required()->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--corpus", re.corpus, "Corpus predictions.jsonl")->required()->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--predictions", re.paths.predictions, "Predictions holding the probe (default: corpus)")
      ->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--probe", re.probe, "Probe image_id")->required();
  retrieve_cmd->add_option("--k", re.k, "Results")->capture_default_str()->check(CLI::PositiveNumber);
  retrieve_cmd->add_option("--json", re.json_out, "Write ranked results as JSON");

  AttentionArgs at;
  auto* attention_cmd = app.add_subcommand("dump-attention", "Export attention maps for one image");
  attention_cmd->add_option("--space", at.paths.space, "space.json")->required()->check(CLI::ExistingFile);
  attention_cmd->add_option("--dataset", at.paths.dataset, "dataset.jsonl")->required()->check(CLI::ExistingFile);
  attention_cmd->add_option("--features", at.paths.features, "Feature container for annotations without one");
  attention_cmd->add_option("--checkpoint", at.paths.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  attention_cmd->add_option("--image", at.image, "image_id")->required();
  attention_cmd->add_option("--verb", at.verb, "Conditioning verb (default: predicted)");
  attention_cmd->add_option("--out-dir", at.paths.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*train_cmd) return cmd_train(tr, train_overrides, seed_opt->count() > 0);
    if (*predict_cmd) return cmd_predict(pr);
    if (*eval_cmd) return cmd_evaluate(ev);
    if (*retrieve_cmd) return cmd_retrieve(re);
    if (*attention_cmd) return cmd_dump_attention(at);
  } catch (const gsr::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 1;
}
