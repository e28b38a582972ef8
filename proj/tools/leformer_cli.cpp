// Command-line surface for the LEFormer toolkit: synthetic data generation,
// training, evaluation, prediction, complexity reporting and gradient checks.
// Exit codes: 0 success, 1 runtime/I-O failure, 2 usage error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "leformer/cli/run_config.hpp"
#include "leformer/core/gradcheck.hpp"
#include "leformer/data/dataset.hpp"
#include "leformer/data/synthetic.hpp"
#include "leformer/eval/complexity.hpp"
#include "leformer/eval/evaluate.hpp"
#include "leformer/train/checkpoint.hpp"
#include "leformer/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace leformer;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
  RunConfig rc = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError(str_cat("--set expects key=value, got ", kv));
    rc.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (const char* env_seed = std::getenv("LEFORMER_SEED"))
    rc.set("train.seed", env_seed);
  return rc;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError(str_cat("cannot write ", path.string()));
  os << content;
}

struct OptimState {
  ParamStore<float> store;
};

ParamStore<float> optim_state_store(const ParamStore<float>& params, AdamW<float>& opt,
                                    int64_t iter) {
  ParamStore<float> st;
  auto it = st.add("iter", {1});
  it.data()[0] = static_cast<float>(iter);
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entry(i);
    auto m = st.add("m/" + e.name, e.tensor.shape());
    auto v = st.add("v/" + e.name, e.tensor.shape());
    std::copy(opt.first_moments()[i].begin(), opt.first_moments()[i].end(), m.values().begin());
    std::copy(opt.second_moments()[i].begin(), opt.second_moments()[i].end(),
              v.values().begin());
  }
  return st;
}

int64_t restore_optim_state(const std::string& path, const ParamStore<float>& params,
                            AdamW<float>& opt) {
  ParamStore<float> st;
  auto it = st.add("iter", {1});
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entry(i);
    st.add("m/" + e.name, e.tensor.shape());
    st.add("v/" + e.name, e.tensor.shape());
  }
  load_checkpoint(st, path);
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& m = *st.find("m/" + params.entry(i).name);
    const auto& v = *st.find("v/" + params.entry(i).name);
    std::copy(m.values().begin(), m.values().end(), opt.first_moments()[i].begin());
    std::copy(v.values().begin(), v.values().end(), opt.second_moments()[i].begin());
  }
  const int64_t iter = static_cast<int64_t>(it.data()[0]);
  opt.set_step_count(iter);
  return iter;
}

int cmd_synth(const SynthSpec& spec, const std::string& out) {
  if (spec.count < 1) throw UsageError("--count must be at least 1");
  spec.validate();
  generate_synthetic(spec, out);
  double fg = 0.0;
  for (int64_t i = 0; i < spec.count; ++i) {
    const Mask m = synth_mask(spec, i);
    int64_t lake = 0;
    for (int32_t v : m.v) lake += v == 1;
    fg += static_cast<double>(lake) / static_cast<double>(m.v.size());
  }
  std::cout << "generated " << spec.count << " image/mask pairs (" << spec.size << "x"
            << spec.size << ") under " << out << "\n"
            << "mean foreground fraction " << std::fixed << std::setprecision(4)
            << fg / static_cast<double>(spec.count) << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, const std::vector<std::string>& overrides,
              const std::string& resume) {
  RunConfig rc = load_run_config(config_path, overrides);
  if (!data_dir.empty()) rc.data.root = data_dir;
  if (rc.data.root.empty()) throw UsageError("no dataset: pass --data or set data.root");
  rc.model.validate();
  rc.train.validate();

  const auto train_set =
      load_dataset(rc.data.root, Split::train, rc.data.split_train, rc.data.split_test);
  const auto test_set =
      load_dataset(rc.data.root, Split::test, rc.data.split_train, rc.data.split_test);
  if (train_set.empty()) throw IoError(str_cat("no training samples under ", rc.data.root));
  std::cout << "dataset " << rc.data.root << ": " << train_set.size() << " train / "
            << test_set.size() << " test\n";

  fs::create_directories(out_dir);
  write_text_file(fs::path(out_dir) / "config.effective", rc.dump());

  LeFormer<float> model(rc.model, rc.train.seed);
  AdamW<float> opt(model.params(), rc.train);
  std::cout << "model parameters: " << model.params().count_params() << "\n";

  int64_t start_iter = 0;
  if (!resume.empty()) {
    const fs::path rdir = fs::is_directory(resume) ? fs::path(resume) : fs::path(resume).parent_path();
    load_checkpoint(model.params(), (rdir / "model.ckpt").string());
    start_iter = restore_optim_state((rdir / "optim.ckpt").string(), model.params(), opt);
    std::cout << "resumed from " << rdir.string() << " at iter " << start_iter << "\n";
  }

  std::ofstream log(fs::path(out_dir) / "train.log", std::ios::app);
  if (!log) throw IoError(str_cat("cannot open training log under ", out_dir));
  const auto report = train(model, opt, train_set, rc.train, &log, start_iter);

  save_checkpoint(model.params(), (fs::path(out_dir) / "model.ckpt").string());
  auto optim_store = optim_state_store(model.params(), opt, report.last_iter);
  save_checkpoint(optim_store, (fs::path(out_dir) / "optim.ckpt").string());
  std::cout << "checkpoint written to " << (fs::path(out_dir) / "model.ckpt").string() << "\n";

  if (!report.loss_series.empty())
    std::cout << "final loss " << report.loss_series.back() << " after " << report.last_iter
              << " iters\n";
  if (!test_set.empty()) {
    const auto m = evaluate(model, test_set);
    ReportTable t;
    t.rows.push_back(metrics_row("test", m));
    std::cout << t.to_text() << t.to_csv();
  }
  return 0;
}

std::pair<LeFormer<float>, RunConfig> load_model(const std::string& checkpoint,
                                                 const std::string& config_path) {
  const fs::path cp(checkpoint);
  const fs::path dir = fs::is_directory(cp) ? cp : cp.parent_path();
  const fs::path ckpt = fs::is_directory(cp) ? cp / "model.ckpt" : cp;
  std::string cfg_file = config_path;
  if (cfg_file.empty()) {
    const fs::path eff = dir / "config.effective";
    if (!fs::exists(eff))
      throw IoError(str_cat("no config given and ", eff.string(), " not found"));
    cfg_file = eff.string();
  }
  RunConfig rc = RunConfig::from_file(cfg_file);
  LeFormer<float> model(rc.model, rc.train.seed);
  load_checkpoint(model.params(), ckpt.string());
  return {std::move(model), std::move(rc)};
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path,
             const std::string& data_dir, const std::string& split) {
  auto [model, rc] = load_model(checkpoint, config_path);
  if (!data_dir.empty()) rc.data.root = data_dir;
  if (rc.data.root.empty()) throw UsageError("no dataset: pass --data or set data.root");
  const Split sp = split == "train" ? Split::train : Split::test;
  const auto samples =
      load_dataset(rc.data.root, sp, rc.data.split_train, rc.data.split_test);
  if (samples.empty()) throw IoError(str_cat("no ", split, " samples under ", rc.data.root));
  const auto m = evaluate(model, samples);
  ReportTable t;
  t.rows.push_back(metrics_row(split, m));
  std::cout << t.to_text() << t.to_csv();
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& config_path,
                const std::string& image_path, const std::string& out_dir) {
  auto [model, rc] = load_model(checkpoint, config_path);
  const auto image = image_to_tensor(read_image_file(image_path));
  if (image.dim(1) % 32 != 0 || image.dim(2) % 32 != 0)
    throw IoError(str_cat("image size ", image.dim(2), "x", image.dim(1),
                          " not divisible by 32: ", image_path));
  const Mask pred = predict_mask(model, image);
  fs::create_directories(out_dir);
  const std::string stem = fs::path(image_path).stem().string();
  const auto mask_path = fs::path(out_dir) / (stem + "_mask.png");
  const auto overlay_path = fs::path(out_dir) / (stem + "_overlay.png");
  write_mask_file(mask_path.string(), pred);
  write_mask_overlay(overlay_path.string(), image, pred);
  int64_t lake = 0;
  for (int32_t v : pred.v) lake += v == 1;
  std::cout << "prediction written to " << mask_path.string() << " and "
            << overlay_path.string() << "\n"
            << "foreground fraction " << std::fixed << std::setprecision(4)
            << static_cast<double>(lake) / static_cast<double>(pred.v.size()) << "\n";
  return 0;
}

int cmd_complexity(const std::string& config_path, const std::vector<std::string>& overrides,
                   int64_t input_size, bool paper_table, bool csv) {
  RunConfig rc = load_run_config(config_path, overrides);
  if (input_size % 32 != 0)
    throw UsageError(str_cat("--input-size ", input_size, " not divisible by 32"));
  if (paper_table) {
    std::vector<std::pair<std::string, ModelConfig>> rows;
    for (int64_t l = 0; l <= 4; ++l) {
      ModelConfig cfg = rc.model;
      cfg.ptl_stages = l;
      rows.emplace_back(str_cat("full L=", l), cfg);
    }
    rows.emplace_back("ce_only", ce_only_config());
    rows.emplace_back("te_only_etl", te_only_config(0));
    rows.emplace_back("te_only_etl_ptl", te_only_config(1));
    const auto table = compare_configs(rows, input_size);
    std::cout << (csv ? table.to_csv() : table.to_text());
    return 0;
  }
  const auto report = count_macs(rc.model, input_size, input_size);
  const auto table = report.table();
  std::cout << (csv ? table.to_csv() : table.to_text());
  std::cout << "params " << std::fixed << std::setprecision(4) << report.total_params_m()
            << "M, macs " << report.total_macs_g() << "G at " << input_size << "x" << input_size
            << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& config_path, const std::vector<std::string>& overrides,
                  int64_t samples) {
  RunConfig rc = load_run_config(config_path, overrides);
  ModelConfig cfg = config_path.empty() ? tiny_config(8) : rc.model;
  LeFormer<double> model(cfg, rc.train.seed);
  Rng rng(derive_seed(rc.train.seed, "gradcheck"));

  Tensor<double> image({1, 3, 32, 32});
  for (auto& v : image.values()) v = rng.uniform(0.0, 1.0);
  Tensor<double> probe({1, cfg.num_classes, 32, 32});
  for (auto& v : probe.values()) v = rng.uniform(-1.0, 1.0);

  GradTape<double> tape;
  {
    GradTape<double>::Scope scope(tape);
    tape.backward(sum_all(mul(model.forward(image), probe)));
  }
  auto loss_value = [&]() {
    GradTape<double>::Pause pause;
    const auto logits = model.forward(image);
    double s = 0.0;
    for (int64_t i = 0; i < logits.numel(); ++i) s += logits.data()[i] * probe.data()[i];
    return s;
  };

  const double h = 1e-4;
  double worst = 0.0;
  for (int64_t k = 0; k < samples; ++k) {
    const size_t entry = static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(model.params().size()) - 1));
    auto& t = model.params().entry(entry).tensor;
    const int64_t idx = rng.uniform_int(0, t.numel() - 1);
    const double orig = t.data()[idx];
    t.data()[idx] = orig + h;
    const double fp = loss_value();
    t.data()[idx] = orig - h;
    const double fm = loss_value();
    t.data()[idx] = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double ad = t.grad_values()[idx];
    const double err = std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), 1e-7});
    worst = std::max(worst, err);
    std::cout << "param " << model.params().entry(entry).name << "[" << idx << "] autograd "
              << ad << " fd " << fd << " rel-err " << err << "\n";
  }
  std::cout << "max rel-err " << worst << " over " << samples << " sampled parameters\n";
  return worst < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LEFormer lake-extraction toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic lake dataset");
  SynthSpec spec;
  std::string synth_out;
  synth->add_option("--count", spec.count, "number of image/mask pairs");
  synth->add_option("--size", spec.size, "square image size");
  synth->add_option("--blob-min", spec.blob_count_min, "minimum lake blobs per image");
  synth->add_option("--blob-max", spec.blob_count_max, "maximum lake blobs per image");
  synth->add_option("--radius-min", spec.blob_radius_min, "minimum blob radius (pixels)");
  synth->add_option("--radius-max", spec.blob_radius_max, "maximum blob radius (pixels)");
  synth->add_option("--noise", spec.noise_amplitude, "per-pixel noise amplitude");
  synth->add_option("--speckle", spec.speckle_prob, "per-pixel speckle probability");
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--out", synth_out, "output dataset directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model");
  std::string train_config, train_data, train_out, train_resume;
  std::vector<std::string> train_sets;
  train_cmd->add_option("--config", train_config, "run configuration file");
  train_cmd->add_option("--data", train_data, "dataset root (overrides data.root)");
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--set", train_sets, "config override key=value (repeatable)");
  train_cmd->add_option("--resume", train_resume, "earlier --out directory to resume from");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_config, eval_data, eval_split = "test";
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model.ckpt or training output dir")
      ->required();
  eval_cmd->add_option("--config", eval_config, "run configuration file");
  eval_cmd->add_option("--data", eval_data, "dataset root");
  eval_cmd->add_option("--split", eval_split, "train or test")
      ->check(CLI::IsMember({"train", "test"}));

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "predict a mask for one image");
  std::string pr_ckpt, pr_config, pr_image, pr_out;
  predict_cmd->add_option("--checkpoint", pr_ckpt, "model.ckpt or training output dir")
      ->required();
  predict_cmd->add_option("--config", pr_config, "run configuration file");
  predict_cmd->add_option("--image", pr_image, "input image (png/ppm)")->required();
  predict_cmd->add_option("--out", pr_out, "output directory")->required();

  // complexity
  auto* cx_cmd = app.add_subcommand("complexity", "parameter/MAC report");
  std::string cx_config;
  std::vector<std::string> cx_sets;
  int64_t cx_size = 256;
  bool cx_paper = false, cx_csv = false;
  cx_cmd->add_option("--config", cx_config, "run configuration file");
  cx_cmd->add_option("--set", cx_sets, "config override key=value (repeatable)");
  cx_cmd->add_option("--input-size", cx_size, "input resolution (multiple of 32)");
  cx_cmd->add_flag("--paper-table", cx_paper, "emit the PTL sweep and encoder ablations");
  cx_cmd->add_flag("--csv", cx_csv, "emit CSV instead of aligned text");

  // gradcheck
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check (float64)");
  std::string gc_config;
  std::vector<std::string> gc_sets;
  int64_t gc_samples = 20;
  gc_cmd->add_option("--config", gc_config, "run configuration file");
  gc_cmd->add_option("--set", gc_sets, "config override key=value (repeatable)");
  gc_cmd->add_option("--samples", gc_samples, "number of sampled parameters");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return cmd_synth(spec, synth_out);
    if (train_cmd->parsed())
      return cmd_train(train_config, train_data, train_out, train_sets, train_resume);
    if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_config, eval_data, eval_split);
    if (predict_cmd->parsed()) return cmd_predict(pr_ckpt, pr_config, pr_image, pr_out);
    if (cx_cmd->parsed()) return cmd_complexity(cx_config, cx_sets, cx_size, cx_paper, cx_csv);
    if (gc_cmd->parsed()) return cmd_gradcheck(gc_config, gc_sets, gc_samples);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
