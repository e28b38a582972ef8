#pragma once

#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace leformer {

// One row of the plain-text / CSV report surface shared by the complexity
// analyzer and the evaluator. Absent fields render blank.
struct ReportRow {
  std::string name;
  std::optional<int64_t> params;
  std::optional<double> macs_g;
  std::optional<double> oa, f1_lake, f1_mean, miou;
};

struct ReportTable {
  std::vector<ReportRow> rows;

  std::string to_csv() const {
    std::ostringstream os;
    os << "name,params,macs_g,oa,f1_lake,f1_mean,miou\n";
    for (const auto& r : rows) {
      os << r.name << ',';
      if (r.params) os << *r.params;
      os << ',';
      append_num(os, r.macs_g, 6);
      os << ',';
      append_num(os, r.oa, 6);
      os << ',';
      append_num(os, r.f1_lake, 6);
      os << ',';
      append_num(os, r.f1_mean, 6);
      os << ',';
      append_num(os, r.miou, 6);
      os << '\n';
    }
    return os.str();
  }

  std::string to_text() const {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"name", "params", "macs_g", "oa", "f1_lake", "f1_mean", "miou"});
    for (const auto& r : rows) {
      std::vector<std::string> row{r.name};
      row.push_back(r.params ? std::to_string(*r.params) : "");
      for (const auto& v : {r.macs_g, r.oa, r.f1_lake, r.f1_mean, r.miou}) {
        std::ostringstream os;
        append_num(os, v, 4);
        row.push_back(os.str());
      }
      cells.push_back(std::move(row));
    }
    std::vector<size_t> width(cells[0].size(), 0);
    for (const auto& row : cells)
      for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream os;
    for (const auto& row : cells) {
      for (size_t c = 0; c < row.size(); ++c)
        os << std::left << std::setw(static_cast<int>(width[c]) + 2) << row[c];
      os << '\n';
    }
    return os.str();
  }

 private:
  static void append_num(std::ostringstream& os, const std::optional<double>& v, int prec) {
    if (v) os << std::fixed << std::setprecision(prec) << *v;
  }
};

}  // namespace leformer
