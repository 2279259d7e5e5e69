#include "sqa/eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "sqa/common/error.hpp"
#include "sqa/eval/metrics.hpp"
#include "sqa/train/progress.hpp"

namespace sqa::eval {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const std::vector<std::string> kSlices = {"CHOP", "CLIP", "ECHO", "NOISE", "ALL"};

std::string cell_fields(const Cell& c) {
  std::string s = "n=" + std::to_string(c.n);
  if (!c.ok()) return s + " error=" + c.error;
  return s + " rmse=" + train::format_real(c.rmse) + " pcc=" + train::format_real(c.pcc) +
         " srcc=" + train::format_real(c.srcc);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Cell slice_metrics(std::span<const double> pred, std::span<const double> mos) {
  Cell c;
  c.n = pred.size();
  try {
    c.rmse = rmse(pred, mos);
    c.pcc = pcc(pred, mos);
    c.srcc = srcc(pred, mos);
  } catch (const Error& e) {
    c.rmse = c.pcc = c.srcc = kNaN;
    c.error = std::string(e.kind());
  }
  return c;
}

MetricsReport MetricsReport::from_predictions(ReportMetadata meta, std::vector<std::string> variants,
                                              std::vector<Prediction> predictions) {
  MetricsReport r;
  r.meta = std::move(meta);
  r.variants = std::move(variants);
  r.predictions = std::move(predictions);
  for (const auto& v : r.variants) {
    std::vector<std::vector<Cell>> by_slice(kSlices.size());
    for (int fold = 0; fold < r.meta.folds; ++fold) {
      std::vector<std::vector<double>> pred(kSlices.size()), mos(kSlices.size());
      for (const auto& p : r.predictions) {
        if (p.variant != v || p.fold != fold) continue;
        for (std::size_t s = 0; s + 1 < kSlices.size(); ++s)
          if (to_string(p.degradation) == kSlices[s]) {
            pred[s].push_back(p.pred);
            mos[s].push_back(p.mos);
          }
        pred.back().push_back(p.pred);
        mos.back().push_back(p.mos);
      }
      for (std::size_t s = 0; s < kSlices.size(); ++s) {
        auto cell = slice_metrics(pred[s], mos[s]);
        r.per_fold.push_back({v, fold, kSlices[s], cell});
        by_slice[s].push_back(cell);
      }
    }
    for (std::size_t s = 0; s < kSlices.size(); ++s) {
      Cell mean;
      for (std::size_t f = 0; f < by_slice[s].size(); ++f) {
        const auto& c = by_slice[s][f];
        mean.n += c.n;
        if (!c.ok() && mean.ok()) mean.error = c.error + "@fold" + std::to_string(f);
        mean.rmse += c.rmse;
        mean.pcc += c.pcc;
        mean.srcc += c.srcc;
      }
      const double k = static_cast<double>(by_slice[s].size());
      if (mean.ok() && k > 0) {
        mean.rmse /= k;
        mean.pcc /= k;
        mean.srcc /= k;
      } else {
        mean.rmse = mean.pcc = mean.srcc = kNaN;
        if (mean.ok()) mean.error = "no_folds";
      }
      r.averaged.push_back({v, kMeanFold, kSlices[s], mean});
    }
  }
  return r;
}

const Record& MetricsReport::find(const std::string& variant, const std::string& slice, int fold) const {
  for (const auto& rec : fold == kMeanFold ? averaged : per_fold)
    if (rec.variant == variant && rec.slice == slice && rec.fold == fold) return rec;
  throw Error(errc::kInvalidArgument, "report has no record for " + variant + "/" + slice);
}

std::string MetricsReport::structured() const {
  std::ostringstream ss;
  ss << "meta seed=" << meta.seed << " config_hash=" << meta.config_hash
     << " dataset_fingerprint=" << meta.dataset_fingerprint << " folds=" << meta.folds << '\n';
  for (const auto* group : {&per_fold, &averaged})
    for (const auto& rec : *group)
      ss << "variant=" << rec.variant << " fold=" << (rec.fold == kMeanFold ? std::string("mean") : std::to_string(rec.fold))
         << " slice=" << rec.slice << ' ' << cell_fields(rec.cell) << '\n';
  return ss.str();
}

std::string MetricsReport::table() const {
  std::ostringstream ss;
  std::size_t width = 8;
  for (const auto& v : variants) width = std::max(width, v.size() + 2);
  const auto pad = [&](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 1, ' '); };
  for (const char* metric : {"RMSE", "PCC", "SRCC"}) {
    ss << pad(metric, width);
    for (const auto& s : kSlices) ss << pad(s, 9);
    ss << '\n';
    for (const auto& v : variants) {
      ss << pad(v, width);
      for (const auto& s : kSlices) {
        const auto& c = find(v, s).cell;
        char buf[32];
        if (!c.ok()) {
          std::snprintf(buf, sizeof buf, "undef");
        } else {
          const double x = metric[0] == 'R' ? c.rmse : metric[0] == 'P' ? c.pcc : c.srcc;
          std::snprintf(buf, sizeof buf, "%.3f", x);
        }
        ss << pad(buf, 9);
      }
      ss << '\n';
    }
    ss << '\n';
  }
  return ss.str();
}

std::string MetricsReport::predictions_csv() const {
  std::ostringstream ss;
  ss << "variant,fold,clip_id,speaker_id,degradation_class,mos,prediction\n";
  for (const auto& p : predictions)
    ss << p.variant << ',' << p.fold << ',' << p.clip_id << ',' << p.speaker << ',' << to_string(p.degradation) << ','
       << train::format_real(p.mos) << ',' << train::format_real(p.pred) << '\n';
  return ss.str();
}

std::vector<Prediction> parse_predictions_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<Prediction> out;
  int row = 0;
  while (std::getline(in, line)) {
    if (++row == 1 || line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw Error(errc::kFormat, "predictions row " + std::to_string(row) + ": expected 7 fields");
    try {
      out.push_back({f[0], std::stoi(f[1]), f[2], f[3], corpus::parse_degradation(f[4]), std::stod(f[5]), std::stod(f[6])});
    } catch (const std::logic_error&) {
      throw Error(errc::kFormat, "predictions row " + std::to_string(row) + ": bad number");
    }
  }
  return out;
}

void assert_speaker_disjoint(const train::Dataset& train, const train::Dataset& test, int fold) {
  const std::set<std::string> seen(train.speakers.begin(), train.speakers.end());
  for (const auto& s : test.speakers)
    if (seen.count(s))
      throw Error(errc::kLeakage, "fold " + std::to_string(fold) + ": test speaker '" + s + "' appears in training data");
}

MetricsReport run_protocol(const std::vector<train::Variant>& variants, const train::Dataset& data,
                           const corpus::SplitPlan& plan, const Predictor& predictor, ReportMetadata meta) {
  data.validate();
  if (data.mos.size() != data.size() || data.speakers.size() != data.size() || data.degradations.size() != data.size())
    throw Error(errc::kInvalidArgument, "protocol needs MOS, speaker and degradation columns");
  meta.folds = plan.fold_count;
  std::vector<Prediction> preds;
  std::vector<std::string> names;
  for (auto v : variants) names.emplace_back(train::to_string(v));
  for (auto v : variants) {
    for (int fold = 0; fold < plan.fold_count; ++fold) {
      std::vector<std::size_t> tr, te;
      for (std::size_t i = 0; i < data.size(); ++i)
        (plan.test_speakers[fold].count(data.speakers[i]) ? te : tr).push_back(i);
      if (tr.empty() || te.empty()) throw Error(errc::kInvalidArgument, "fold " + std::to_string(fold) + " has an empty split");
      const auto train_set = data.subset(tr);
      const auto test_set = data.subset(te);
      assert_speaker_disjoint(train_set, test_set, fold);
      const auto out = predictor(v, fold, train_set, test_set);
      if (out.size() != te.size()) throw Error(errc::kShape, "predictor returned the wrong number of scores");
      for (std::size_t k = 0; k < te.size(); ++k)
        preds.push_back({std::string(train::to_string(v)), fold, test_set.clip_ids[k], test_set.speakers[k],
                         test_set.degradations[k], test_set.mos[k], out[k]});
    }
  }
  return MetricsReport::from_predictions(std::move(meta), std::move(names), std::move(preds));
}

}  // namespace sqa::eval
