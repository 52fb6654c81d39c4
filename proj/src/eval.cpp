// Copyright 2026 The calibfw Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "calibfw/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "calibfw/nn/training.hpp"

namespace calibfw {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed(double v, int digits = 2) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

// Round the axis maximum up to 1, 2 or 5 times a power of ten.
double nice_ceiling(double v) {
  if (!(v > 0.0)) return 1.0;
  const double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * p >= v) return m * p;
  return 10.0 * p;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Frame {
  double width = 640, height = 400;
  double left = 70, right = 20, top = 30, bottom = 60;
  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
};

void axes(std::ostringstream& os, const Frame& f, double ymax, const std::string& xlabel,
          const std::string& ylabel) {
  const double x0 = f.left, y0 = f.top + f.plot_h();
  os << "<line x1=\"" << x0 << "\" y1=\"" << f.top << "\" x2=\"" << x0 << "\" y2=\"" << y0
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 + f.plot_w() << "\" y2=\"" << y0
     << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = ymax * t / 5.0;
    const double y = y0 - f.plot_h() * t / 5.0;
    os << "<line x1=\"" << x0 - 4 << "\" y1=\"" << fixed(y) << "\" x2=\"" << x0 << "\" y2=\""
       << fixed(y) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x0 - 6 << "\" y=\"" << fixed(y + 4) << "\" text-anchor=\"end\">"
       << num(v) << "</text>\n";
  }
  os << "<text x=\"" << fixed(x0 + f.plot_w() / 2) << "\" y=\"" << f.height - 12
     << "\" text-anchor=\"middle\">" << xml(xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << fixed(f.top + f.plot_h() / 2) << "\" text-anchor=\"middle\" "
     << "transform=\"rotate(-90 16 " << fixed(f.top + f.plot_h() / 2) << ")\">" << xml(ylabel)
     << "</text>\n";
}

std::string svg_open(const Frame& f) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return os.str();
}

}  // namespace

EvalReport make_report(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& targets,
                       std::string model, std::string dataset) {
  if (pred.rows() == 0) throw std::invalid_argument("evaluate: empty dataset");
  const Eigen::Vector3d m = nn::per_output_mse(pred, targets);
  EvalReport r;
  r.model = std::move(model);
  r.dataset = std::move(dataset);
  r.mse_focal = m[0];
  r.mse_pitch = m[1];
  r.mse_roll = m[2];
  r.mu_mse = (m[0] + m[1] + m[2]) / 3.0;
  r.n = static_cast<int>(pred.rows());
  return r;
}

EvalResult evaluate(const nn::Network<float>& net, const LabeledSet& set, const std::string& model,
                    const std::optional<BiCParams>& bic, int workers) {
  if (set.empty()) throw std::invalid_argument("evaluate: empty dataset " + set.id);
  const Eigen::MatrixXd pred = nn::predict(net, set, workers);
  EvalResult out{make_report(pred, set.targets, model, set.id), std::nullopt};
  if (bic) out.corrected = make_report(bic_apply(pred, *bic), set.targets, model + "+bic", set.id);
  return out;
}

std::vector<EvalReport> cross_evaluate(const std::vector<NamedModel>& models,
                                       const std::vector<NamedSet>& datasets, int workers) {
  std::vector<EvalReport> grid;
  for (const auto& m : models) {
    if (!m.net) throw std::invalid_argument("cross_evaluate: model " + m.name + " is missing");
    for (const auto& d : datasets) {
      if (!d.set) throw std::invalid_argument("cross_evaluate: dataset " + d.name + " is missing");
      auto r = evaluate(*m.net, *d.set, m.name, m.bic, workers);
      r.raw.dataset = d.name;
      grid.push_back(r.raw);
      if (r.corrected) {
        r.corrected->dataset = d.name;
        grid.push_back(*r.corrected);
      }
    }
  }
  return grid;
}

SweepResult exemplar_sweep(const SweepSetup& setup, std::vector<double> pcts,
                           const StrategyConfig& strategy, const nn::TrainConfig& train,
                           std::uint64_t seed) {
  if (pcts.empty()) throw std::invalid_argument("exemplar_sweep: no percentages given");
  std::sort(pcts.begin(), pcts.end());
  for (std::size_t i = 0; i < pcts.size(); ++i) {
    if (!(pcts[i] >= 0.0 && pcts[i] <= 100.0))
      throw std::invalid_argument("exemplar_sweep: percentages must lie in [0, 100]");
    if (i > 0 && pcts[i] == pcts[i - 1])
      throw std::invalid_argument("exemplar_sweep: duplicate percentage " + num(pcts[i]));
  }
  SweepResult out;
  for (double pct : pcts) {
    StrategyConfig s = strategy;
    s.exemplar_pct = pct;
    Rng rng(seed);
    const auto run = train_incremental(setup.base, setup.data, s, train, rng);
    out.rows.push_back({pct, nn::mu_mse(nn::predict(run.net, setup.old_eval, train.workers), setup.old_eval.targets),
                        nn::mu_mse(nn::predict(run.net, setup.new_eval, train.workers), setup.new_eval.targets)});
  }
  return out;
}

void emit_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path) {
  if (reports.empty()) throw std::invalid_argument("emit_csv: no reports");
  std::ostringstream os;
  os << "model,dataset,mse_focal,mse_roll,mse_pitch,mu_mse,n\n";
  for (const auto& r : reports)
    os << csv_field(r.model) << ',' << csv_field(r.dataset) << ',' << num(r.mse_focal) << ','
       << num(r.mse_roll) << ',' << num(r.mse_pitch) << ',' << num(r.mu_mse) << ',' << r.n << '\n';
  write_file(path, os.str());
}

void emit_sweep_csv(const SweepResult& sweep, const std::filesystem::path& path) {
  if (sweep.rows.empty()) throw std::invalid_argument("emit_sweep_csv: empty sweep");
  std::ostringstream os;
  os << "exemplar_pct,mu_mse_old,mu_mse_new\n";
  for (const auto& r : sweep.rows) os << num(r.pct) << ',' << num(r.mu_mse_old) << ',' << num(r.mu_mse_new) << '\n';
  write_file(path, os.str());
}

void emit_svg(const std::vector<EvalReport>& reports, const std::filesystem::path& path) {
  if (reports.empty()) throw std::invalid_argument("emit_svg: no reports");
  std::vector<std::string> models, datasets;
  for (const auto& r : reports) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
  }
  double ymax = 0.0;
  for (const auto& r : reports) ymax = std::max(ymax, r.mu_mse);
  ymax = nice_ceiling(ymax);

  Frame f;
  f.height = 400 + 16.0 * double(datasets.size());
  f.bottom = 60 + 16.0 * double(datasets.size());
  std::ostringstream os;
  os << svg_open(f);
  axes(os, f, ymax, "model", "muMSE");
  const double group_w = f.plot_w() / double(models.size());
  const double bar_w = group_w * 0.8 / double(datasets.size());
  const double y0 = f.top + f.plot_h();
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const double gx = f.left + group_w * double(mi) + group_w * 0.1;
    for (std::size_t di = 0; di < datasets.size(); ++di) {
      auto it = std::find_if(reports.begin(), reports.end(), [&](const EvalReport& r) {
        return r.model == models[mi] && r.dataset == datasets[di];
      });
      if (it == reports.end()) continue;
      const double h = f.plot_h() * it->mu_mse / ymax;
      os << "<rect x=\"" << fixed(gx + bar_w * double(di)) << "\" y=\"" << fixed(y0 - h)
         << "\" width=\"" << fixed(bar_w) << "\" height=\"" << fixed(h) << "\" fill=\""
         << kPalette[di % 8] << "\"><title>" << xml(it->model + " / " + it->dataset) << ": "
         << num(it->mu_mse) << "</title></rect>\n";
    }
    os << "<text x=\"" << fixed(gx + group_w * 0.4) << "\" y=\"" << fixed(y0 + 16)
       << "\" text-anchor=\"middle\">" << xml(models[mi]) << "</text>\n";
  }
  for (std::size_t di = 0; di < datasets.size(); ++di) {
    const double ly = f.height - f.bottom + 44 + 16.0 * double(di);
    os << "<rect x=\"" << f.left << "\" y=\"" << fixed(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
       << kPalette[di % 8] << "\"/>\n";
    os << "<text x=\"" << f.left + 16 << "\" y=\"" << fixed(ly) << "\">" << xml(datasets[di]) << "</text>\n";
  }
  os << "</svg>\n";
  write_file(path, os.str());
}

void emit_sweep_svg(const SweepResult& sweep, const std::filesystem::path& path,
                    const std::string& old_label, const std::string& new_label) {
  if (sweep.rows.empty()) throw std::invalid_argument("emit_sweep_svg: empty sweep");
  double ymax = 0.0;
  for (const auto& r : sweep.rows) ymax = std::max({ymax, r.mu_mse_old, r.mu_mse_new});
  ymax = nice_ceiling(ymax);
  Frame f;
  f.bottom = 90;
  std::ostringstream os;
  os << svg_open(f);
  axes(os, f, ymax, "exemplars (%)", "muMSE");
  const double y0 = f.top + f.plot_h();
  auto px = [&](double pct) { return f.left + f.plot_w() * pct / 100.0; };
  auto py = [&](double v) { return y0 - f.plot_h() * v / ymax; };
  for (int t = 0; t <= 100; t += 20) {
    os << "<line x1=\"" << fixed(px(t)) << "\" y1=\"" << y0 << "\" x2=\"" << fixed(px(t)) << "\" y2=\""
       << y0 + 4 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fixed(px(t)) << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">" << t
       << "</text>\n";
  }
  const std::pair<const char*, const std::string*> series[] = {{kPalette[0], &old_label},
                                                               {kPalette[1], &new_label}};
  for (int s = 0; s < 2; ++s) {
    os << "<polyline fill=\"none\" stroke=\"" << series[s].first << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
      const double v = s == 0 ? sweep.rows[i].mu_mse_old : sweep.rows[i].mu_mse_new;
      os << (i ? " " : "") << fixed(px(sweep.rows[i].pct)) << ',' << fixed(py(v));
    }
    os << "\"/>\n";
    for (const auto& r : sweep.rows) {
      const double v = s == 0 ? r.mu_mse_old : r.mu_mse_new;
      os << "<circle cx=\"" << fixed(px(r.pct)) << "\" cy=\"" << fixed(py(v)) << "\" r=\"3\" fill=\""
         << series[s].first << "\"/>\n";
    }
    const double ly = f.height - 40 + 16.0 * s;
    os << "<rect x=\"" << f.left << "\" y=\"" << fixed(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
       << series[s].first << "\"/>\n";
    os << "<text x=\"" << f.left + 16 << "\" y=\"" << fixed(ly) << "\">" << xml(*series[s].second)
       << "</text>\n";
  }
  os << "</svg>\n";
  write_file(path, os.str());
}

}  // namespace calibfw
