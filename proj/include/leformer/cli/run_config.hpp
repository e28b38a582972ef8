#pragma once

#include <fstream>
#include <map>
#include <sstream>

#include "leformer/model/config.hpp"
#include "leformer/train/optimizer.hpp"

namespace leformer {

struct DataConfig {
  std::string root;
  int64_t split_train = 4, split_test = 1;
};

// Flat key-value run configuration with section prefixes (model., train.,
// data.). The effective-config dump reproduces a run exactly when fed back.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;

  void set(const std::string& key, const std::string& value) {
    if (!try_set(key, value)) throw ValueError(str_cat("unknown config key: ", key));
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError(str_cat("cannot open config file: ", path));
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        if (line.find_first_not_of(" \t\r") != std::string::npos)
          throw ValueError(str_cat("malformed line ", lineno, " in ", path));
        continue;
      }
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  std::string dump() const {
    std::ostringstream os;
    for (int i = 0; i < 4; ++i) {
      const auto& st = model.stages[i];
      const std::string p = str_cat("model.stage", i + 1, ".");
      os << p << "k = " << st.k << "\n" << p << "s = " << st.s << "\n"
         << p << "p = " << st.p << "\n" << p << "c = " << st.c << "\n"
         << p << "r = " << st.r << "\n" << p << "n = " << st.n << "\n"
         << p << "l = " << st.l << "\n";
    }
    os << "model.num_classes = " << model.num_classes << "\n";
    os << "model.ptl_stages = " << model.ptl_stages << "\n";
    os << "model.decoder_dim = " << model.decoder_dim << "\n";
    os << "model.cbam_reduction = " << model.cbam_reduction << "\n";
    os << "model.mlp_ratio = " << model.mlp_ratio << "\n";
    os << "model.width_multiplier = " << model.width_multiplier.num << "/"
       << model.width_multiplier.den << "\n";
    os << "model.use_ce = " << (model.use_ce ? 1 : 0) << "\n";
    os << "model.use_te = " << (model.use_te ? 1 : 0) << "\n";
    os << "model.use_msca = " << (model.use_msca ? 1 : 0) << "\n";
    os << "train.total_iters = " << train.total_iters << "\n";
    os << "train.batch_size = " << train.batch_size << "\n";
    os << "train.lr0 = " << fmt(train.lr0) << "\n";
    os << "train.weight_decay = " << fmt(train.weight_decay) << "\n";
    os << "train.beta1 = " << fmt(train.beta1) << "\n";
    os << "train.beta2 = " << fmt(train.beta2) << "\n";
    os << "train.eps = " << fmt(train.eps) << "\n";
    os << "train.poly_power = " << fmt(train.poly_power) << "\n";
    os << "train.min_lr = " << fmt(train.min_lr) << "\n";
    os << "train.seed = " << train.seed << "\n";
    os << "train.crop_size = " << train.crop_size << "\n";
    os << "train.resize_min = " << fmt(train.resize_min) << "\n";
    os << "train.resize_max = " << fmt(train.resize_max) << "\n";
    os << "train.hflip_prob = " << fmt(train.hflip_prob) << "\n";
    os << "train.log_interval = " << train.log_interval << "\n";
    os << "data.root = " << data.root << "\n";
    os << "data.split_train = " << data.split_train << "\n";
    os << "data.split_test = " << data.split_test << "\n";
    return os.str();
  }

 private:
  static std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
  }

  static std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
  }

  static int64_t to_int(const std::string& v) {
    size_t end = 0;
    const int64_t r = std::stoll(v, &end);
    if (end != v.size()) throw ValueError(str_cat("not an integer: ", v));
    return r;
  }

  static double to_double(const std::string& v) {
    size_t end = 0;
    const double r = std::stod(v, &end);
    if (end != v.size()) throw ValueError(str_cat("not a number: ", v));
    return r;
  }

  static bool to_bool(const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ValueError(str_cat("not a boolean: ", v));
  }

  static Rational to_rational(const std::string& v) {
    const auto slash = v.find('/');
    if (slash == std::string::npos) return {to_int(v), 1};
    return {to_int(v.substr(0, slash)), to_int(v.substr(slash + 1))};
  }

  bool try_set(const std::string& key, const std::string& value) {
    for (int i = 0; i < 4; ++i) {
      const std::string p = str_cat("model.stage", i + 1, ".");
      if (key.rfind(p, 0) != 0) continue;
      auto& st = model.stages[i];
      const std::string f = key.substr(p.size());
      if (f == "k") st.k = to_int(value);
      else if (f == "s") st.s = to_int(value);
      else if (f == "p") st.p = to_int(value);
      else if (f == "c") st.c = to_int(value);
      else if (f == "r") st.r = to_int(value);
      else if (f == "n") st.n = to_int(value);
      else if (f == "l") st.l = to_int(value);
      else return false;
      return true;
    }
    if (key == "model.num_classes") model.num_classes = to_int(value);
    else if (key == "model.ptl_stages") model.ptl_stages = to_int(value);
    else if (key == "model.decoder_dim") model.decoder_dim = to_int(value);
    else if (key == "model.cbam_reduction") model.cbam_reduction = to_int(value);
    else if (key == "model.mlp_ratio") model.mlp_ratio = to_int(value);
    else if (key == "model.width_multiplier") model.width_multiplier = to_rational(value);
    else if (key == "model.use_ce") model.use_ce = to_bool(value);
    else if (key == "model.use_te") model.use_te = to_bool(value);
    else if (key == "model.use_msca") model.use_msca = to_bool(value);
    else if (key == "train.total_iters") train.total_iters = to_int(value);
    else if (key == "train.batch_size") train.batch_size = to_int(value);
    else if (key == "train.lr0") train.lr0 = to_double(value);
    else if (key == "train.weight_decay") train.weight_decay = to_double(value);
    else if (key == "train.beta1") train.beta1 = to_double(value);
    else if (key == "train.beta2") train.beta2 = to_double(value);
    else if (key == "train.eps") train.eps = to_double(value);
    else if (key == "train.poly_power") train.poly_power = to_double(value);
    else if (key == "train.min_lr") train.min_lr = to_double(value);
    else if (key == "train.seed") train.seed = static_cast<uint64_t>(to_int(value));
    else if (key == "train.crop_size") train.crop_size = to_int(value);
    else if (key == "train.resize_min") train.resize_min = to_double(value);
    else if (key == "train.resize_max") train.resize_max = to_double(value);
    else if (key == "train.hflip_prob") train.hflip_prob = to_double(value);
    else if (key == "train.log_interval") train.log_interval = to_int(value);
    else if (key == "data.root") data.root = value;
    else if (key == "data.split_train") data.split_train = to_int(value);
    else if (key == "data.split_test") data.split_test = to_int(value);
    else return false;
    return true;
  }
};

}  // namespace leformer
