#pragma once

// Inter-annotator agreement over items x raters Likert scores (1-10):
// Fleiss' kappa, mean pairwise Cohen's kappa, ICC(2,1), Krippendorff's
// alpha and mean pairwise Pearson r.

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nyaya/error.hpp"
#include "nyaya/text.hpp"

namespace nyaya {

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 10;

class RatingMatrix {
 public:
  RatingMatrix(std::vector<std::string> items, std::vector<std::string> raters)
      : items_(std::move(items)), raters_(std::move(raters)), cells_(items_.size() * raters_.size()) {
    if (raters_.size() < 2) throw Error(Errc::InvalidMatrix, "at least 2 raters required");
    if (items_.empty()) throw Error(Errc::InvalidMatrix, "at least 1 item required");
    for (std::size_t i = 0; i < items_.size(); ++i) item_pos_[items_[i]] = i;
    for (std::size_t r = 0; r < raters_.size(); ++r) rater_pos_[raters_[r]] = r;
    if (item_pos_.size() != items_.size() || rater_pos_.size() != raters_.size()) {
      throw Error(Errc::InvalidMatrix, "duplicate item or rater id");
    }
  }

  /// Dense construction; 0 marks a missing cell.
  static RatingMatrix from_rows(const std::vector<std::vector<int>>& rows) {
    if (rows.empty()) throw Error(Errc::InvalidMatrix, "at least 1 item required");
    std::vector<std::string> items, raters;
    for (std::size_t i = 0; i < rows.size(); ++i) items.push_back("i" + std::to_string(i));
    for (std::size_t r = 0; r < rows.front().size(); ++r) raters.push_back("r" + std::to_string(r));
    RatingMatrix m(std::move(items), std::move(raters));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.n_raters()) throw Error(Errc::InvalidMatrix, "ragged rows");
      for (std::size_t r = 0; r < rows[i].size(); ++r) {
        if (rows[i][r] != 0) m.set(i, r, rows[i][r]);
      }
    }
    return m;
  }

  void set(std::size_t item, std::size_t rater, int score) {
    if (score < kMinScore || score > kMaxScore) {
      throw Error(Errc::InvalidMatrix, "score " + std::to_string(score) + " outside [1, 10]");
    }
    cells_.at(item * raters_.size() + rater) = score;
  }

  void set(const std::string& item, const std::string& rater, int score) {
    auto i = item_pos_.find(item);
    auto r = rater_pos_.find(rater);
    if (i == item_pos_.end() || r == rater_pos_.end()) throw Error(Errc::InvalidMatrix, "unknown item or rater");
    set(i->second, r->second, score);
  }

  std::optional<int> at(std::size_t item, std::size_t rater) const { return cells_.at(item * raters_.size() + rater); }

  std::size_t n_items() const noexcept { return items_.size(); }
  std::size_t n_raters() const noexcept { return raters_.size(); }
  const std::vector<std::string>& items() const noexcept { return items_; }
  const std::vector<std::string>& raters() const noexcept { return raters_; }

  bool complete() const noexcept {
    return std::all_of(cells_.begin(), cells_.end(), [](const auto& c) { return c.has_value(); });
  }

  /// Copy with items reordered by `order` (a permutation of item indices).
  RatingMatrix permuted_items(const std::vector<std::size_t>& order) const {
    std::vector<std::string> items;
    for (auto i : order) items.push_back(items_.at(i));
    RatingMatrix m(std::move(items), raters_);
    for (std::size_t k = 0; k < order.size(); ++k) {
      for (std::size_t r = 0; r < n_raters(); ++r) {
        if (auto v = at(order[k], r)) m.set(k, r, *v);
      }
    }
    return m;
  }

 private:
  std::vector<std::string> items_;
  std::vector<std::string> raters_;
  std::vector<std::optional<int>> cells_;
  std::map<std::string, std::size_t> item_pos_;
  std::map<std::string, std::size_t> rater_pos_;
};

/// How Likert scores map to categories for the nominal statistics.
enum class Categories {
  Nominal,   ///< each of the 10 scores is its own category
  ThreeBin,  ///< 1-3 / 4-6 / 7-10
};

inline int category_of(int score, Categories c) noexcept {
  if (c == Categories::Nominal) return score;
  return score <= 3 ? 1 : (score <= 6 ? 2 : 3);
}

namespace detail {

inline void require_complete(const RatingMatrix& m) {
  if (!m.complete()) throw Error(Errc::IncompleteMatrix, "statistic requires every cell to be rated");
}

inline std::string pair_name(const RatingMatrix& m, std::size_t a, std::size_t b) {
  return m.raters()[a] + "/" + m.raters()[b];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fleiss

/// True when every rating falls in one category (expected agreement 1).
inline bool fleiss_degenerate(const RatingMatrix& m, Categories cats = Categories::Nominal) {
  std::set<int> seen;
  for (std::size_t i = 0; i < m.n_items(); ++i)
    for (std::size_t r = 0; r < m.n_raters(); ++r)
      if (auto v = m.at(i, r)) seen.insert(category_of(*v, cats));
  return seen.size() <= 1;
}

/// kappa = (P - Pe) / (1 - Pe). Returns 1.0 when Pe = 1.
inline double fleiss_kappa(const RatingMatrix& m, Categories cats = Categories::Nominal) {
  detail::require_complete(m);
  if (fleiss_degenerate(m, cats)) return 1.0;
  const double n = static_cast<double>(m.n_raters());
  const double items = static_cast<double>(m.n_items());
  std::map<int, double> category_totals;
  double p_bar = 0.0;
  for (std::size_t i = 0; i < m.n_items(); ++i) {
    std::map<int, double> counts;
    for (std::size_t r = 0; r < m.n_raters(); ++r) counts[category_of(*m.at(i, r), cats)] += 1.0;
    double sq = 0.0;
    for (const auto& [c, k] : counts) {
      sq += k * k;
      category_totals[c] += k;
    }
    p_bar += (sq - n) / (n * (n - 1.0));
  }
  p_bar /= items;
  double p_e = 0.0;
  for (const auto& [c, total] : category_totals) {
    double p = total / (items * n);
    p_e += p * p;
  }
  return (p_bar - p_e) / (1.0 - p_e);
}

// ---------------------------------------------------------------------------
// Cohen

struct PairStatistic {
  std::string rater_a;
  std::string rater_b;
  double value = 0.0;
  std::size_t n_shared = 0;
};

inline double cohen_kappa(const std::vector<int>& a, const std::vector<int>& b, Categories cats = Categories::Nominal) {
  if (a.size() != b.size() || a.size() < 2) throw Error(Errc::InsufficientOverlap, "need >= 2 shared items");
  const double n = static_cast<double>(a.size());
  std::map<int, double> ma, mb;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    int ca = category_of(a[i], cats), cb = category_of(b[i], cats);
    ma[ca] += 1.0;
    mb[cb] += 1.0;
    if (ca == cb) agree += 1.0;
  }
  double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [c, k] : ma) {
    if (auto it = mb.find(c); it != mb.end()) p_e += (k / n) * (it->second / n);
  }
  if (p_e >= 1.0) return 1.0;
  return (p_o - p_e) / (1.0 - p_e);
}

namespace detail {

inline void shared_columns(const RatingMatrix& m, std::size_t a, std::size_t b, std::vector<int>& xa, std::vector<int>& xb) {
  xa.clear();
  xb.clear();
  for (std::size_t i = 0; i < m.n_items(); ++i) {
    auto va = m.at(i, a), vb = m.at(i, b);
    if (va && vb) {
      xa.push_back(*va);
      xb.push_back(*vb);
    }
  }
}

template <typename PairFn>
std::vector<PairStatistic> for_each_pair(const RatingMatrix& m, PairFn&& fn) {
  std::vector<PairStatistic> out;
  std::vector<int> xa, xb;
  for (std::size_t a = 0; a < m.n_raters(); ++a) {
    for (std::size_t b = a + 1; b < m.n_raters(); ++b) {
      shared_columns(m, a, b, xa, xb);
      out.push_back({m.raters()[a], m.raters()[b], fn(a, b, xa, xb), xa.size()});
    }
  }
  return out;
}

inline double mean_of(const std::vector<PairStatistic>& pairs) {
  double s = 0.0;
  for (const auto& p : pairs) s += p.value;
  return s / static_cast<double>(pairs.size());
}

}  // namespace detail

inline std::vector<PairStatistic> pairwise_cohen(const RatingMatrix& m, Categories cats = Categories::Nominal) {
  return detail::for_each_pair(m, [&](std::size_t a, std::size_t b, const auto& xa, const auto& xb) {
    if (xa.size() < 2) throw Error(Errc::InsufficientOverlap, detail::pair_name(m, a, b));
    return cohen_kappa(xa, xb, cats);
  });
}

inline double mean_pairwise_cohen(const RatingMatrix& m, Categories cats = Categories::Nominal) {
  return detail::mean_of(pairwise_cohen(m, cats));
}

// ---------------------------------------------------------------------------
// ICC(2,1)

/// Two-way random effects, absolute agreement, single rater.
inline double icc(const RatingMatrix& m) {
  detail::require_complete(m);
  const std::size_t n = m.n_items(), k = m.n_raters();
  if (n < 2) throw Error(Errc::InsufficientData, "ICC needs at least 2 items");
  double grand = 0.0;
  std::vector<double> row(n, 0.0), col(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < k; ++r) {
      double x = *m.at(i, r);
      row[i] += x;
      col[r] += x;
      grand += x;
    }
  }
  const double dn = static_cast<double>(n), dk = static_cast<double>(k);
  grand /= dn * dk;
  double ss_total = 0.0, ss_rows = 0.0, ss_cols = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < k; ++r) ss_total += (*m.at(i, r) - grand) * (*m.at(i, r) - grand);
  }
  if (ss_total == 0.0) throw Error(Errc::ZeroVariance, "all scores are equal");
  for (auto& v : row) ss_rows += dk * (v / dk - grand) * (v / dk - grand);
  for (auto& v : col) ss_cols += dn * (v / dn - grand) * (v / dn - grand);
  double ss_err = ss_total - ss_rows - ss_cols;
  double ms_rows = ss_rows / (dn - 1.0);
  double ms_cols = ss_cols / (dk - 1.0);
  double ms_err = ss_err / ((dn - 1.0) * (dk - 1.0));
  return (ms_rows - ms_err) / (ms_rows + (dk - 1.0) * ms_err + dk * (ms_cols - ms_err) / dn);
}

// ---------------------------------------------------------------------------
// Krippendorff

enum class MeasurementLevel { Nominal, Ordinal, Interval };

inline std::string_view to_string(MeasurementLevel l) noexcept {
  switch (l) {
    case MeasurementLevel::Nominal: return "nominal";
    case MeasurementLevel::Ordinal: return "ordinal";
    case MeasurementLevel::Interval: return "interval";
  }
  return "interval";
}

/// alpha = 1 - D_o / D_e from the coincidence matrix of pairable values.
/// Units with fewer than two ratings contribute nothing. When every
/// pairable value is identical the coefficient is reported as 1.0.
inline double krippendorff_alpha(const RatingMatrix& m, MeasurementLevel level = MeasurementLevel::Interval) {
  std::vector<int> values;  // distinct values, ascending
  std::vector<std::vector<int>> units;
  for (std::size_t i = 0; i < m.n_items(); ++i) {
    std::vector<int> u;
    for (std::size_t r = 0; r < m.n_raters(); ++r)
      if (auto v = m.at(i, r)) u.push_back(*v);
    if (u.size() >= 2) {
      values.insert(values.end(), u.begin(), u.end());
      units.push_back(std::move(u));
    }
  }
  if (units.size() < 2) throw Error(Errc::InsufficientData, "need at least 2 items with 2 or more ratings");
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const std::size_t V = values.size();
  auto index_of = [&](int v) {
    return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
  };

  std::vector<double> o(V * V, 0.0);
  for (const auto& u : units) {
    const double w = 1.0 / static_cast<double>(u.size() - 1);
    for (std::size_t a = 0; a < u.size(); ++a)
      for (std::size_t b = 0; b < u.size(); ++b)
        if (a != b) o[index_of(u[a]) * V + index_of(u[b])] += w;
  }
  std::vector<double> n_c(V, 0.0);
  for (std::size_t c = 0; c < V; ++c)
    for (std::size_t k = 0; k < V; ++k) n_c[c] += o[c * V + k];
  const double n = std::accumulate(n_c.begin(), n_c.end(), 0.0);

  auto delta2 = [&](std::size_t c, std::size_t k) -> double {
    if (c == k) return 0.0;
    switch (level) {
      case MeasurementLevel::Nominal: return 1.0;
      case MeasurementLevel::Interval: {
        double d = values[c] - values[k];
        return d * d;
      }
      case MeasurementLevel::Ordinal: {
        auto lo = std::min(c, k), hi = std::max(c, k);
        double s = 0.0;
        for (auto g = lo; g <= hi; ++g) s += n_c[g];
        s -= (n_c[c] + n_c[k]) / 2.0;
        return s * s;
      }
    }
    return 0.0;
  };

  double d_o = 0.0, d_e = 0.0;
  for (std::size_t c = 0; c < V; ++c) {
    for (std::size_t k = 0; k < V; ++k) {
      double d = delta2(c, k);
      d_o += o[c * V + k] * d;
      d_e += n_c[c] * n_c[k] * d;
    }
  }
  d_o /= n;
  d_e /= n * (n - 1.0);
  if (d_e == 0.0) return 1.0;
  return 1.0 - d_o / d_e;
}

// ---------------------------------------------------------------------------
// Pearson

inline double pearson(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.size() < 3) throw Error(Errc::InsufficientOverlap, "need >= 3 shared items");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw Error(Errc::ZeroVariance, "constant rating column");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline std::vector<PairStatistic> pairwise_pearson(const RatingMatrix& m) {
  return detail::for_each_pair(m, [&](std::size_t a, std::size_t b, const auto& xa, const auto& xb) {
    if (xa.size() < 3) throw Error(Errc::InsufficientOverlap, detail::pair_name(m, a, b));
    try {
      return pearson(xa, xb);
    } catch (const Error& e) {
      throw Error(e.code(), detail::pair_name(m, a, b));
    }
  });
}

inline double mean_pairwise_pearson(const RatingMatrix& m) { return detail::mean_of(pairwise_pearson(m)); }

// ---------------------------------------------------------------------------
// report

struct AgreementReport {
  std::optional<double> fleiss_kappa;
  std::optional<double> mean_cohen_kappa;
  std::optional<double> icc;
  std::optional<double> krippendorff_alpha;
  std::optional<double> mean_pearson;
  /// Why a statistic is absent, or a note on a conventional value (e.g. DegenerateAgreement).
  std::map<std::string, std::string> notes;
  std::vector<PairStatistic> cohen_pairs;
  std::vector<PairStatistic> pearson_pairs;
  std::size_t n_items = 0;
  std::size_t n_raters = 0;
};

struct AgreementOptions {
  Categories categories = Categories::Nominal;
  MeasurementLevel level = MeasurementLevel::Interval;
};

/// Computes all five statistics; a statistic whose preconditions fail is
/// left absent with its reason in `notes`, never reported as 0.
inline AgreementReport agreement_report(const RatingMatrix& m, const AgreementOptions& opt = {}) {
  AgreementReport rep;
  rep.n_items = m.n_items();
  rep.n_raters = m.n_raters();
  auto attempt = [&](const char* name, std::optional<double>& slot, const auto& fn) {
    try {
      slot = fn();
    } catch (const Error& e) {
      rep.notes[name] = e.what();
    }
  };
  attempt("fleiss_kappa", rep.fleiss_kappa, [&] { return fleiss_kappa(m, opt.categories); });
  if (rep.fleiss_kappa && fleiss_degenerate(m, opt.categories)) {
    rep.notes["fleiss_kappa"] = "DegenerateAgreement: all ratings in one category; 1.0 by convention";
  }
  attempt("mean_cohen_kappa", rep.mean_cohen_kappa, [&] {
    rep.cohen_pairs = pairwise_cohen(m, opt.categories);
    return detail::mean_of(rep.cohen_pairs);
  });
  attempt("icc", rep.icc, [&] { return icc(m); });
  attempt("krippendorff_alpha", rep.krippendorff_alpha, [&] { return krippendorff_alpha(m, opt.level); });
  attempt("mean_pearson", rep.mean_pearson, [&] {
    rep.pearson_pairs = pairwise_pearson(m);
    return detail::mean_of(rep.pearson_pairs);
  });
  return rep;
}

inline nlohmann::json to_json(const AgreementReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  auto pairs = [](const std::vector<PairStatistic>& ps) {
    auto a = nlohmann::json::array();
    for (const auto& p : ps) a.push_back({{"rater_a", p.rater_a}, {"rater_b", p.rater_b}, {"value", p.value}, {"n_shared", p.n_shared}});
    return a;
  };
  return {{"fleiss_kappa", opt(r.fleiss_kappa)},
          {"mean_cohen_kappa", opt(r.mean_cohen_kappa)},
          {"icc", opt(r.icc)},
          {"krippendorff_alpha", opt(r.krippendorff_alpha)},
          {"mean_pearson", opt(r.mean_pearson)},
          {"notes", r.notes},
          {"cohen_pairs", pairs(r.cohen_pairs)},
          {"pearson_pairs", pairs(r.pearson_pairs)},
          {"n_items", r.n_items},
          {"n_raters", r.n_raters}};
}

// ---------------------------------------------------------------------------
// rating records

inline const std::vector<std::string>& rating_criteria() {
  static const std::vector<std::string> c = {"factual accuracy", "legal relevance", "completeness"};
  return c;
}

struct RatingRecord {
  std::string item_id;
  std::string rater_id;
  std::string criterion;
  int score = 0;
  std::string submitted_at;

  bool operator==(const RatingRecord&) const = default;
};

/// Matrix over the given records; later records for the same
/// (item, rater, criterion) replace earlier ones. With no criterion the
/// matrix pools criteria, one row per (item, criterion).
inline RatingMatrix build_rating_matrix(const std::vector<RatingRecord>& records,
                                        const std::optional<std::string>& criterion = std::nullopt) {
  std::map<std::pair<std::string, std::string>, int> cells;
  std::set<std::string> items, raters;
  for (const auto& r : records) {
    if (criterion && r.criterion != *criterion) continue;
    auto item = criterion ? r.item_id : r.item_id + " | " + r.criterion;
    cells[{item, r.rater_id}] = r.score;
    items.insert(item);
    raters.insert(r.rater_id);
  }
  RatingMatrix m({items.begin(), items.end()}, {raters.begin(), raters.end()});
  for (const auto& [key, score] : cells) m.set(key.first, key.second, score);
  return m;
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

}  // namespace detail

/// CSV with a header naming item_id, rater_id, criterion, score (any order).
inline std::vector<RatingRecord> parse_ratings_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[std::string(trim(header[i]))] = i;
  for (const char* name : {"item_id", "rater_id", "criterion", "score"}) {
    if (!col.count(name)) throw Error(Errc::MalformedRecord, std::string("ratings CSV lacks column ") + name);
  }
  std::vector<RatingRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) {
      throw Error(Errc::MalformedRecord, "ratings line " + std::to_string(line_no) + ": wrong field count");
    }
    RatingRecord r{std::string(trim(f[col["item_id"]])), std::string(trim(f[col["rater_id"]])),
                   to_lower(trim(f[col["criterion"]])), 0, {}};
    try {
      std::size_t pos = 0;
      auto text = std::string(trim(f[col["score"]]));
      r.score = std::stoi(text, &pos);
      if (pos != text.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(Errc::MalformedRecord, "ratings line " + std::to_string(line_no) + ": score is not an integer");
    }
    if (r.score < kMinScore || r.score > kMaxScore) {
      throw Error(Errc::MalformedRecord, "ratings line " + std::to_string(line_no) + ": score outside [1, 10]");
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// One report per criterion present in `records`, plus "pooled".
inline std::map<std::string, AgreementReport> agreement_by_criterion(const std::vector<RatingRecord>& records,
                                                                     const AgreementOptions& opt = {}) {
  std::set<std::string> criteria;
  for (const auto& r : records) criteria.insert(r.criterion);
  std::map<std::string, AgreementReport> out;
  for (const auto& c : criteria) out[c] = agreement_report(build_rating_matrix(records, c), opt);
  out["pooled"] = agreement_report(build_rating_matrix(records), opt);
  return out;
}

inline void write_agreement_table(std::ostream& out, const std::map<std::string, AgreementReport>& reports) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << *v;
    return s.str();
  };
  out << std::left << std::setw(20) << "criterion" << std::setw(10) << "fleiss" << std::setw(10) << "cohen"
      << std::setw(10) << "icc" << std::setw(10) << "alpha" << std::setw(10) << "pearson" << "items x raters\n";
  for (const auto& [name, r] : reports) {
    out << std::setw(20) << name << std::setw(10) << cell(r.fleiss_kappa) << std::setw(10) << cell(r.mean_cohen_kappa)
        << std::setw(10) << cell(r.icc) << std::setw(10) << cell(r.krippendorff_alpha) << std::setw(10)
        << cell(r.mean_pearson) << r.n_items << " x " << r.n_raters << "\n";
  }
  for (const auto& [name, r] : reports) {
    for (const auto& [stat, note] : r.notes) out << "  " << name << ": " << stat << " -- " << note << "\n";
  }
}

}  // namespace nyaya
