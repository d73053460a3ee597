#include "snseg/functionals.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>

namespace snseg {

FunctionalSpec FunctionalSpec::mean() { return {}; }

FunctionalSpec FunctionalSpec::variance(int coord) {
  FunctionalSpec s;
  s.kind = FunctionalKind::variance;
  s.i = coord;
  return s;
}

FunctionalSpec FunctionalSpec::covariance(int a, int b) {
  FunctionalSpec s;
  s.kind = FunctionalKind::covariance;
  s.i = a;
  s.j = b;
  return s;
}

FunctionalSpec FunctionalSpec::correlation(int a, int b) {
  FunctionalSpec s = covariance(a, b);
  s.kind = FunctionalKind::correlation;
  return s;
}

FunctionalSpec FunctionalSpec::autocovariance(int coord, int lag) {
  FunctionalSpec s;
  s.kind = FunctionalKind::autocovariance;
  s.i = coord;
  s.lag = lag;
  return s;
}

FunctionalSpec FunctionalSpec::autocorrelation(int coord, int lag) {
  FunctionalSpec s = autocovariance(coord, lag);
  s.kind = FunctionalKind::autocorrelation;
  return s;
}

FunctionalSpec FunctionalSpec::quantile(int coord, double q) {
  FunctionalSpec s;
  s.kind = FunctionalKind::quantile;
  s.i = coord;
  s.q = q;
  return s;
}

FunctionalSpec FunctionalSpec::covariance_matrix() {
  FunctionalSpec s;
  s.kind = FunctionalKind::covariance_matrix;
  return s;
}

FunctionalSpec FunctionalSpec::multi(std::vector<FunctionalSpec> parts) {
  FunctionalSpec s;
  s.kind = FunctionalKind::multi;
  s.parts = std::move(parts);
  return s;
}

int FunctionalSpec::output_dim(int p) const {
  switch (kind) {
    case FunctionalKind::mean:
      return p;
    case FunctionalKind::covariance_matrix:
      return packed_size(p);
    case FunctionalKind::multi: {
      int d = 0;
      for (const auto& part : parts) d += part.output_dim(p);
      return d;
    }
    default:
      return 1;
  }
}

int FunctionalSpec::embed_offset() const {
  switch (kind) {
    case FunctionalKind::autocovariance:
    case FunctionalKind::autocorrelation:
      return lag;
    case FunctionalKind::multi: {
      int off = 0;
      for (const auto& part : parts) off = std::max(off, part.embed_offset());
      return off;
    }
    default:
      return 0;
  }
}

void FunctionalSpec::validate(int p) const {
  auto check_coord = [p](int c) {
    if (c < 1 || c > p) {
      throw std::invalid_argument("coordinate " + std::to_string(c) + " outside [1, " +
                                  std::to_string(p) + "]");
    }
  };
  switch (kind) {
    case FunctionalKind::mean:
    case FunctionalKind::covariance_matrix:
      return;
    case FunctionalKind::variance:
      check_coord(i);
      return;
    case FunctionalKind::covariance:
    case FunctionalKind::correlation:
      check_coord(i);
      check_coord(j);
      return;
    case FunctionalKind::autocovariance:
    case FunctionalKind::autocorrelation:
      check_coord(i);
      if (lag < 1) throw std::invalid_argument("lag must be >= 1");
      return;
    case FunctionalKind::quantile:
      check_coord(i);
      if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile level must lie in (0,1)");
      return;
    case FunctionalKind::multi:
      if (parts.empty()) throw std::invalid_argument("multi functional needs at least one part");
      for (const auto& part : parts) part.validate(p);
      return;
  }
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_top(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == '(') ++depth;
    if (s[k] == ')') --depth;
    if (s[k] == sep && depth == 0) {
      out.push_back(trim(s.substr(start, k - start)));
      start = k + 1;
    }
  }
  out.push_back(trim(s.substr(start)));
  return out;
}

template <class T>
T parse_number(std::string_view s, std::string_view context) {
  s = trim(s);
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad number '" + std::string(s) + "' in functional '" +
                                std::string(context) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

FunctionalSpec parse_functional(std::string_view text) {
  const std::string_view s = trim(text);
  const auto colon = s.find(':');
  const std::string_view head = trim(s.substr(0, colon));
  const std::string_view args = colon == std::string_view::npos ? std::string_view{} : trim(s.substr(colon + 1));
  auto pair_args = [&]() {
    const auto xs = split_top(args, ',');
    if (xs.size() != 2) throw std::invalid_argument("functional '" + std::string(s) + "' needs two arguments");
    return xs;
  };

  if (head == "mean" && args.empty()) return FunctionalSpec::mean();
  if (head == "covmat" && args.empty()) return FunctionalSpec::covariance_matrix();
  if (head == "variance") {
    return FunctionalSpec::variance(args.empty() ? 1 : parse_number<int>(args, s));
  }
  if (head == "cov" || head == "cor") {
    const auto xs = pair_args();
    const int a = parse_number<int>(xs[0], s);
    const int b = parse_number<int>(xs[1], s);
    return head == "cov" ? FunctionalSpec::covariance(a, b) : FunctionalSpec::correlation(a, b);
  }
  if (head == "acov" || head == "acor") {
    const auto xs = pair_args();
    const int c = parse_number<int>(xs[0], s);
    const int l = parse_number<int>(xs[1], s);
    return head == "acov" ? FunctionalSpec::autocovariance(c, l) : FunctionalSpec::autocorrelation(c, l);
  }
  if (head == "quantile") {
    const auto xs = pair_args();
    return FunctionalSpec::quantile(parse_number<int>(xs[0], s), parse_number<double>(xs[1], s));
  }
  if (head == "multi") {
    if (args.size() < 2 || args.front() != '(' || args.back() != ')') {
      throw std::invalid_argument("multi functional must look like multi:(a;b;...)");
    }
    std::vector<FunctionalSpec> parts;
    for (auto piece : split_top(args.substr(1, args.size() - 2), ';')) {
      parts.push_back(parse_functional(piece));
    }
    return FunctionalSpec::multi(std::move(parts));
  }
  throw std::invalid_argument("unknown functional '" + std::string(s) + "'");
}

std::string to_string(const FunctionalSpec& spec) {
  const auto two = [](int a, int b) { return std::to_string(a) + "," + std::to_string(b); };
  switch (spec.kind) {
    case FunctionalKind::mean:
      return "mean";
    case FunctionalKind::variance:
      return "variance:" + std::to_string(spec.i);
    case FunctionalKind::covariance:
      return "cov:" + two(spec.i, spec.j);
    case FunctionalKind::correlation:
      return "cor:" + two(spec.i, spec.j);
    case FunctionalKind::autocovariance:
      return "acov:" + two(spec.i, spec.lag);
    case FunctionalKind::autocorrelation:
      return "acor:" + two(spec.i, spec.lag);
    case FunctionalKind::quantile:
      return "quantile:" + std::to_string(spec.i) + "," + format_double(spec.q);
    case FunctionalKind::covariance_matrix:
      return "covmat";
    case FunctionalKind::multi: {
      std::string out = "multi:(";
      for (std::size_t k = 0; k < spec.parts.size(); ++k) {
        if (k > 0) out += ";";
        out += to_string(spec.parts[k]);
      }
      return out + ")";
    }
  }
  return {};
}

namespace detail {

// Product of up to two lagged centered coordinates; c2 < 0 marks a first-order term.
struct Term {
  int c1, l1, c2, l2;
  friend bool operator==(const Term&, const Term&) = default;
};

struct Part {
  FunctionalKind kind;
  int out = 0;
  int coord = 0;
  double q = 0.5;
  std::vector<int> first;
  std::vector<int> second;
  int tx = -1, ty = -1, txx = -1, tyy = -1, txy = -1;
};

struct EstimatorData {
  FunctionalSpec spec;
  int n = 0, p = 0, dim = 0, offset = 0;
  std::vector<Term> terms;
  // terms x (n+1); extended precision keeps short-segment central moments accurate after differencing
  std::vector<long double> prefix;
  std::vector<double> center;
  std::vector<Part> parts;
  std::vector<int> quantile_parts;
  Eigen::MatrixXd raw;
  bool closed_form = false;
  std::vector<double> p1, pi, p2;  // mean-only moment prefixes

  long double range(int term, int a, int b) const {
    const long double* P = prefix.data() + static_cast<std::size_t>(term) * (n + 1);
    return P[b] - P[a - 1];
  }

  int add_term(Term t) {
    for (std::size_t k = 0; k < terms.size(); ++k) {
      if (terms[k] == t) return static_cast<int>(k);
    }
    terms.push_back(t);
    return static_cast<int>(terms.size()) - 1;
  }

  void add_parts(const FunctionalSpec& s, int& out) {
    Part part;
    part.kind = s.kind;
    part.out = out;
    const int c = s.i - 1;
    switch (s.kind) {
      case FunctionalKind::multi:
        for (const auto& sub : s.parts) add_parts(sub, out);
        return;
      case FunctionalKind::mean:
        for (int k = 0; k < p; ++k) part.first.push_back(add_term({k, 0, -1, 0}));
        break;
      case FunctionalKind::covariance_matrix:
        for (int k = 0; k < p; ++k) part.first.push_back(add_term({k, 0, -1, 0}));
        for (int r = 0; r < p; ++r) {
          for (int k = r; k < p; ++k) part.second.push_back(add_term({r, 0, k, 0}));
        }
        break;
      case FunctionalKind::variance:
        part.tx = add_term({c, 0, -1, 0});
        part.txx = add_term({c, 0, c, 0});
        break;
      case FunctionalKind::covariance:
      case FunctionalKind::correlation: {
        const int c2 = s.j - 1;
        part.tx = add_term({c, 0, -1, 0});
        part.ty = add_term({c2, 0, -1, 0});
        part.txy = add_term({c, 0, c2, 0});
        part.txx = add_term({c, 0, c, 0});
        part.tyy = add_term({c2, 0, c2, 0});
        break;
      }
      case FunctionalKind::autocovariance:
      case FunctionalKind::autocorrelation:
        part.tx = add_term({c, 0, -1, 0});
        part.ty = add_term({c, s.lag, -1, 0});
        part.txy = add_term({c, 0, c, s.lag});
        part.txx = add_term({c, 0, c, 0});
        part.tyy = add_term({c, s.lag, c, s.lag});
        break;
      case FunctionalKind::quantile:
        part.coord = c;
        part.q = s.q;
        quantile_parts.push_back(static_cast<int>(parts.size()));
        break;
    }
    out += s.output_dim(p);
    parts.push_back(std::move(part));
  }

  // Smooth components over [a,b]; quantile slots are left untouched.
  bool eval_smooth(int a, int b, double* out) const {
    const long double m = b - a + 1;
    bool ok = true;
    auto E = [&](int t) { return range(t, a, b) / m; };
    for (const Part& part : parts) {
      double* o = out + part.out;
      switch (part.kind) {
        case FunctionalKind::mean:
          for (int k = 0; k < p; ++k) o[k] = static_cast<double>(E(part.first[k]) + center[k]);
          break;
        case FunctionalKind::covariance_matrix: {
          if (a == b) {
            std::fill(o, o + p * (p + 1) / 2, 0.0);
            break;
          }
          int idx = 0;
          for (int r = 0; r < p; ++r) {
            const long double er = E(part.first[r]);
            for (int k = r; k < p; ++k, ++idx) o[idx] = static_cast<double>(E(part.second[idx]) - er * E(part.first[k]));
          }
          break;
        }
        case FunctionalKind::variance: {
          const long double ex = E(part.tx);
          o[0] = a == b ? 0.0 : static_cast<double>(E(part.txx) - ex * ex);
          break;
        }
        case FunctionalKind::covariance:
        case FunctionalKind::autocovariance:
          if (part.kind == FunctionalKind::autocovariance && b - a + 1 < 2) {
            ok = false;
            o[0] = 0.0;
            break;
          }
          o[0] = a == b ? 0.0 : static_cast<double>(E(part.txy) - E(part.tx) * E(part.ty));
          break;
        case FunctionalKind::correlation:
        case FunctionalKind::autocorrelation: {
          if (a == b) {
            ok = false;
            o[0] = 0.0;
            break;
          }
          const long double ex = E(part.tx), ey = E(part.ty);
          const long double exx = E(part.txx), eyy = E(part.tyy);
          const long double vx = exx - ex * ex, vy = eyy - ey * ey;
          if (vx <= 1e-12 * exx || vy <= 1e-12 * eyy) {
            ok = false;
            o[0] = 0.0;
            break;
          }
          o[0] = static_cast<double>((E(part.txy) - ex * ey) / std::sqrt(vx * vy));
          break;
        }
        default:
          break;
      }
    }
    return ok;
  }
};

}  // namespace detail

namespace {

int quantile_rank(double q, int m) {
  const int r = static_cast<int>(std::ceil(q * m - 1e-9));
  return std::clamp(r, 1, m);
}

}  // namespace

Estimator::Estimator(const TimeSeries& series, const FunctionalSpec& spec)
    : data_(std::make_unique<detail::EstimatorData>()) {
  auto& D = *data_;
  spec.validate(series.p());
  D.spec = spec;
  D.n = series.n();
  D.p = series.p();
  D.dim = spec.output_dim(D.p);
  D.offset = spec.embed_offset();
  if (D.n - D.offset < 2) throw std::invalid_argument("series too short for requested lag");

  int out = 0;
  D.add_parts(spec, out);

  const auto& Y = series.data();
  D.center.resize(D.p);
  for (int c = 0; c < D.p; ++c) D.center[c] = Y.col(c).mean();
  auto z = [&](int t, int c) { return Y(t - 1, c) - D.center[c]; };

  const int n = D.n;
  D.prefix.assign(D.terms.size() * static_cast<std::size_t>(n + 1), 0.0);
  for (std::size_t k = 0; k < D.terms.size(); ++k) {
    const auto& t = D.terms[k];
    const int lag = std::max(t.l1, t.c2 >= 0 ? t.l2 : 0);
    long double* P = D.prefix.data() + k * (n + 1);
    for (int s = 1; s <= n; ++s) {
      long double v = 0.0;
      if (s - lag >= 1) v = static_cast<long double>(z(s - t.l1, t.c1)) * (t.c2 >= 0 ? z(s - t.l2, t.c2) : 1.0);
      P[s] = P[s - 1] + v;
    }
  }

  if (!D.quantile_parts.empty()) D.raw = Y;

  if (spec.kind == FunctionalKind::mean) {
    D.closed_form = true;
    const int p = D.p;
    const int pp = packed_size(p);
    D.p1.assign(static_cast<std::size_t>(p) * (n + 1), 0.0);
    D.pi.assign(static_cast<std::size_t>(p) * (n + 1), 0.0);
    D.p2.assign(static_cast<std::size_t>(pp) * (n + 1), 0.0);
    std::vector<double> S(p);
    for (int u = 1; u <= n; ++u) {
      for (int c = 0; c < p; ++c) {
        S[c] = static_cast<double>(D.prefix[static_cast<std::size_t>(D.parts[0].first[c]) * (n + 1) + u]);
        D.p1[c * (n + 1) + u] = D.p1[c * (n + 1) + u - 1] + S[c];
        D.pi[c * (n + 1) + u] = D.pi[c * (n + 1) + u - 1] + u * S[c];
      }
      int idx = 0;
      for (int r = 0; r < p; ++r) {
        for (int c = r; c < p; ++c, ++idx) {
          D.p2[idx * (n + 1) + u] = D.p2[idx * (n + 1) + u - 1] + S[r] * S[c];
        }
      }
    }
  }
}

Estimator::~Estimator() = default;
Estimator::Estimator(Estimator&&) noexcept = default;
Estimator& Estimator::operator=(Estimator&&) noexcept = default;

int Estimator::n() const { return data_->n; }
int Estimator::p() const { return data_->p; }
int Estimator::dim() const { return data_->dim; }
int Estimator::offset() const { return data_->offset; }
const FunctionalSpec& Estimator::spec() const { return data_->spec; }
bool Estimator::has_closed_form_normalizer() const { return data_->closed_form; }

bool Estimator::estimate(int a, int b, double* out) const {
  const auto& D = *data_;
  if (a < D.offset + 1 || b > D.n || a > b) {
    throw std::out_of_range("estimate range [" + std::to_string(a) + "," + std::to_string(b) +
                            "] outside the effective range");
  }
  bool ok = D.eval_smooth(a, b, out);
  if (!D.quantile_parts.empty()) {
    thread_local std::vector<double> buf;
    const int m = b - a + 1;
    for (int idx : D.quantile_parts) {
      const auto& part = D.parts[idx];
      buf.assign(D.raw.col(part.coord).data() + (a - 1), D.raw.col(part.coord).data() + b);
      const int r = quantile_rank(part.q, m);
      std::nth_element(buf.begin(), buf.begin() + (r - 1), buf.end());
      out[part.out] = buf[r - 1];
    }
  }
  return ok;
}

std::vector<double> Estimator::estimate(int a, int b) const {
  std::vector<double> out(dim());
  estimate(a, b, out.data());
  return out;
}

void Estimator::mean_segment(int a, int b, double* theta, double* lambda) const {
  const auto& D = *data_;
  const int n = D.n, p = D.p;
  const double m = b - a + 1;
  const double sc1 = (m + 1.0) / 2.0;
  const double sc2 = (m + 1.0) * (2.0 * m + 1.0) / (6.0 * m);
  thread_local std::vector<double> buf;
  buf.resize(4 * static_cast<std::size_t>(p));
  double* S0 = buf.data();
  double* tot = S0 + p;
  double* sumS = tot + p;
  double* sumCS = sumS + p;
  for (int c = 0; c < p; ++c) {
    const long double* P = D.prefix.data() + static_cast<std::size_t>(D.parts[0].first[c]) * (n + 1);
    S0[c] = static_cast<double>(P[a - 1]);
    tot[c] = static_cast<double>(P[b] - P[a - 1]);
    theta[c] = tot[c] / m + D.center[c];
    const double* P1 = D.p1.data() + c * (n + 1);
    const double* PI = D.pi.data() + c * (n + 1);
    sumS[c] = P1[b] - P1[a - 1];
    sumCS[c] = ((PI[b] - PI[a - 1]) - (a - 1.0) * sumS[c]) / m;
  }
  int idx = 0;
  for (int r = 0; r < p; ++r) {
    for (int c = r; c < p; ++c, ++idx) {
      const double* P2 = D.p2.data() + idx * (n + 1);
      lambda[idx] = (P2[b] - P2[a - 1]) - sumS[r] * S0[c] - S0[r] * sumS[c] - sumCS[r] * tot[c] -
                    tot[r] * sumCS[c] + m * S0[r] * S0[c] + sc1 * (S0[r] * tot[c] + tot[r] * S0[c]) +
                    sc2 * tot[r] * tot[c];
    }
  }
}

namespace {

struct RunningQuantile {
  std::priority_queue<double> lower;
  std::priority_queue<double, std::vector<double>, std::greater<>> upper;
  double q = 0.5;

  double push(double x) {
    if (!lower.empty() && x <= lower.top()) {
      lower.push(x);
    } else {
      upper.push(x);
    }
    const int m = static_cast<int>(lower.size() + upper.size());
    const auto r = static_cast<std::size_t>(quantile_rank(q, m));
    while (lower.size() > r) {
      upper.push(lower.top());
      lower.pop();
    }
    while (lower.size() < r) {
      lower.push(upper.top());
      upper.pop();
    }
    return lower.top();
  }
};

}  // namespace

struct ForwardSweep::Heaps {
  std::vector<RunningQuantile> qs;
};
struct BackwardSweep::Heaps {
  std::vector<RunningQuantile> qs;
};

ForwardSweep::ForwardSweep(const Estimator& est, int a) : est_(est), a_(a), b_(a - 1) {
  const auto& D = est.data();
  if (!D.quantile_parts.empty()) {
    heaps_ = std::make_unique<Heaps>();
    for (int idx : D.quantile_parts) heaps_->qs.push_back({.q = D.parts[idx].q});
  }
}
ForwardSweep::~ForwardSweep() = default;

bool ForwardSweep::next(double* out) {
  ++b_;
  const auto& D = est_.data();
  const bool ok = D.eval_smooth(a_, b_, out);
  if (heaps_) {
    for (std::size_t k = 0; k < D.quantile_parts.size(); ++k) {
      const auto& part = D.parts[D.quantile_parts[k]];
      out[part.out] = heaps_->qs[k].push(D.raw(b_ - 1, part.coord));
    }
  }
  return ok;
}

BackwardSweep::BackwardSweep(const Estimator& est, int b) : est_(est), a_(b + 1), b_(b) {
  const auto& D = est.data();
  if (!D.quantile_parts.empty()) {
    heaps_ = std::make_unique<Heaps>();
    for (int idx : D.quantile_parts) heaps_->qs.push_back({.q = D.parts[idx].q});
  }
}
BackwardSweep::~BackwardSweep() = default;

bool BackwardSweep::next(double* out) {
  --a_;
  const auto& D = est_.data();
  const bool ok = D.eval_smooth(a_, b_, out);
  if (heaps_) {
    for (std::size_t k = 0; k < D.quantile_parts.size(); ++k) {
      const auto& part = D.parts[D.quantile_parts[k]];
      out[part.out] = heaps_->qs[k].push(D.raw(a_ - 1, part.coord));
    }
  }
  return ok;
}

bool segment_normalizer(const Estimator& est, int a, int b, double* theta, double* lambda) {
  if (est.has_closed_form_normalizer()) {
    est.mean_segment(a, b, theta, lambda);
    return true;
  }
  const int d = est.dim();
  const int dp = packed_size(d);
  const int m = b - a + 1;
  thread_local std::vector<double> back;
  thread_local std::vector<char> back_ok;
  thread_local std::vector<double> fwd;
  thread_local std::vector<double> diff;
  back.resize(static_cast<std::size_t>(m) * d);
  back_ok.resize(m);
  fwd.resize(d);
  diff.resize(d);

  // back[x - a] holds theta_{x,b}
  BackwardSweep bs(est, b);
  for (int x = b; x >= a; --x) back_ok[x - a] = bs.next(back.data() + static_cast<std::size_t>(x - a) * d);
  const bool ok = back_ok[0];
  std::copy_n(back.data(), d, theta);

  std::fill_n(lambda, dp, 0.0);
  ForwardSweep fs(est, a);
  const double m2 = static_cast<double>(m) * m;
  for (int i = a; i < b; ++i) {
    const bool f_ok = fs.next(fwd.data());
    if (!f_ok || !back_ok[i + 1 - a]) continue;
    const double u = static_cast<double>(i - a + 1) * (b - i);
    const double w = u * u / m2;
    const double* bk = back.data() + static_cast<std::size_t>(i + 1 - a) * d;
    for (int r = 0; r < d; ++r) diff[r] = fwd[r] - bk[r];
    int idx = 0;
    for (int r = 0; r < d; ++r) {
      const double wr = w * diff[r];
      for (int c = r; c < d; ++c, ++idx) lambda[idx] += wr * diff[c];
    }
  }
  return ok;
}

}  // namespace snseg
