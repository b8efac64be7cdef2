#include "chlab/wickalg.hpp"

#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace chlab {

Coef Coef::from_double(double re, double im) {
  auto exact = [](double x) {
    if (!std::isfinite(x)) throw DomainError("non-finite coefficient");
    if (x == 0.0) return Rational(0);
    int e = 0;
    double m = std::frexp(x, &e);
    auto mant = static_cast<long long>(std::ldexp(m, 53));
    Rational r(mant);
    int shift = e - 53;
    Integer p = Integer(1) << std::abs(shift);
    return shift >= 0 ? r * Rational(p) : r / Rational(p);
  };
  return {exact(re), exact(im)};
}

std::pair<double, double> Coef::to_double() const { return {re.convert_to<double>(), im.convert_to<double>()}; }

std::string Coef::str() const {
  if (im == 0) return re.str();
  if (re == 0) return im.str() + "i";
  return "(" + re.str() + (im > 0 ? "+" : "") + im.str() + "i)";
}

// ---------------------------------------------------------------------------

bool TestFunctionTable::same_function(const TestFunction& a, const TestFunction& b) {
  if (a.spacetime != b.spacetime) return false;
  Box u;
  for (int d = 0; d < 4; ++d)
    u.range[d] = {std::min(a.support.range[d][0], b.support.range[d][0]),
                  std::max(a.support.range[d][1], b.support.range[d][1])};
  std::mt19937 rng(7);
  double diff = 0.0, scale = 0.0;
  for (int k = 0; k < 64; ++k) {
    Point p;
    for (int d = 0; d < 4; ++d) p[d] = std::uniform_real_distribution<double>(u.range[d][0], u.range[d][1])(rng);
    double va = a(p), vb = b(p);
    diff = std::max(diff, std::abs(va - vb));
    scale = std::max({scale, std::abs(va), std::abs(vb)});
  }
  return diff <= 1e-10 * scale;
}

int TestFunctionTable::add(const TestFunction& f) {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].f && entries_[i].spacetime == f.spacetime && same_function(*entries_[i].f, f))
      return static_cast<int>(i);
  entries_.push_back({f.spacetime, std::make_shared<const TestFunction>(f), {}, false});
  return static_cast<int>(entries_.size() - 1);
}

int TestFunctionTable::combination(const std::vector<std::pair<Coef, int>>& terms) {
  if (terms.empty()) throw DomainError("empty combination");
  std::string st = spacetime(terms.front().second);
  for (const auto& [c, id] : terms)
    if (spacetime(id) != st) throw DomainError("combination mixes spacetimes");
  entries_.push_back({st, nullptr, terms, false});
  return static_cast<int>(entries_.size() - 1);
}

void TestFunctionTable::mark_p_exact(int id) {
  at(id);
  entries_[id].p_exact = true;
}

const TestFunction& TestFunctionTable::at(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) throw std::out_of_range("unknown test function id");
  if (!entries_[id].f) throw DomainError("test function id is a combination");
  return *entries_[id].f;
}

const std::string& TestFunctionTable::spacetime(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) throw std::out_of_range("unknown test function id");
  return entries_[id].spacetime;
}

bool TestFunctionTable::is_p_exact(int id) const {
  spacetime(id);
  return entries_[id].p_exact;
}

const std::vector<std::pair<Coef, int>>* TestFunctionTable::expansion(int id) const {
  spacetime(id);
  return entries_[id].f ? nullptr : &entries_[id].terms;
}

// ---------------------------------------------------------------------------

AlgebraElement AlgebraElement::identity(std::string spacetime) { return word(std::move(spacetime), {}); }

AlgebraElement AlgebraElement::word(std::string spacetime, Word w, Coef c) {
  AlgebraElement a(std::move(spacetime));
  a.add_term(w, c);
  return a;
}

void AlgebraElement::add_term(const Word& w, const Coef& c) {
  if (c.is_zero()) return;
  auto [it, fresh] = terms_.emplace(w, c);
  if (fresh) return;
  it->second += c;
  if (it->second.is_zero()) terms_.erase(it);
}

AlgebraElement AlgebraElement::star() const {
  AlgebraElement out(spacetime_);
  for (const auto& [w, c] : terms_) out.add_term(Word(w.rbegin(), w.rend()), c.conj());
  return out;
}

std::string AlgebraElement::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [w, c] : terms_) {
    if (!first) os << " + ";
    first = false;
    os << c.str();
    if (w.empty()) os << "*1";
    for (int id : w) os << "*phi(f" << id << ")";
  }
  return os.str();
}

namespace {

void same_algebra(const AlgebraElement& a, const AlgebraElement& b) {
  if (a.spacetime() != b.spacetime())
    throw DomainError("algebra elements live on '" + a.spacetime() + "' and '" + b.spacetime() + "'");
}

}  // namespace

AlgebraElement operator+(const AlgebraElement& a, const AlgebraElement& b) {
  same_algebra(a, b);
  AlgebraElement out = a;
  for (const auto& [w, c] : b.terms_) out.add_term(w, c);
  return out;
}

AlgebraElement operator-(const AlgebraElement& a, const AlgebraElement& b) { return a + Coef(-1) * b; }

AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b) {
  same_algebra(a, b);
  AlgebraElement out(a.spacetime_);
  for (const auto& [wa, ca] : a.terms_)
    for (const auto& [wb, cb] : b.terms_) {
      Word w = wa;
      w.insert(w.end(), wb.begin(), wb.end());
      out.add_term(w, ca * cb);
    }
  return out;
}

AlgebraElement operator*(const Coef& c, const AlgebraElement& a) {
  AlgebraElement out(a.spacetime_);
  for (const auto& [w, x] : a.terms_) out.add_term(w, c * x);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Relations (i) and (iii): replace combination letters by their terms, drop P-exact letters.
void expand_letters(const Word& w, std::size_t i, Word& prefix, const Coef& c, const TestFunctionTable& table,
                    std::vector<std::pair<Word, Coef>>& out) {
  if (i == w.size()) {
    out.emplace_back(prefix, c);
    return;
  }
  if (const auto* terms = table.expansion(w[i])) {
    for (const auto& [a, id] : *terms) {
      Word sub = w;
      sub[i] = id;
      expand_letters(sub, i, prefix, c * a, table, out);
    }
    return;
  }
  if (table.is_p_exact(w[i])) return;
  prefix.push_back(w[i]);
  expand_letters(w, i + 1, prefix, c, table, out);
  prefix.pop_back();
}

void order_word(const Word& w, const Coef& c, const PairingOracle& E, AlgebraElement& out) {
  std::size_t i = 0;
  while (i + 1 < w.size() && w[i] <= w[i + 1]) ++i;
  if (i + 1 >= w.size()) {
    out.add_term(w, c);
    return;
  }
  Word swapped = w;
  std::swap(swapped[i], swapped[i + 1]);
  order_word(swapped, c, E, out);
  Coef e = E(w[i], w[i + 1]);
  if (e.is_zero()) return;
  Word contracted;
  contracted.reserve(w.size() - 2);
  contracted.insert(contracted.end(), w.begin(), w.begin() + static_cast<std::ptrdiff_t>(i));
  contracted.insert(contracted.end(), w.begin() + static_cast<std::ptrdiff_t>(i) + 2, w.end());
  order_word(contracted, c * Coef::i() * e, E, out);
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

AlgebraElement normal_form(const AlgebraElement& elem, const TestFunctionTable& table, const PairingOracle& E) {
  AlgebraElement out(elem.spacetime());
  for (const auto& [w, c] : elem.terms()) {
    for (int id : w)
      if (table.spacetime(id) != elem.spacetime())
        throw DomainError("generator f" + std::to_string(id) + " does not live on '" + elem.spacetime() + "'");
    std::vector<std::pair<Word, Coef>> expanded;
    Word prefix;
    expand_letters(w, 0, prefix, c, table, expanded);
    for (const auto& [x, a] : expanded) order_word(x, a, E, out);
  }
  return out;
}

PairingOracle symbolic_pairing(std::uint64_t seed) {
  return [seed](int a, int b) -> Coef {
    if (a == b) return 0;
    int lo = std::min(a, b), hi = std::max(a, b);
    std::uint64_t h = splitmix(seed ^ splitmix((static_cast<std::uint64_t>(lo) << 32) | static_cast<std::uint32_t>(hi)));
    Rational q(static_cast<long long>(h % 101) - 50, static_cast<long long>((h >> 8) % 12) + 1);
    return a < b ? Coef(q) : Coef(-q);
  };
}

NumericPairing::NumericPairing(std::shared_ptr<const Spacetime> st, const TestFunctionTable& table,
                               PropagatorOptions opt)
    : st_(std::move(st)), table_(&table), opt_(opt) {}

double NumericPairing::value(int a, int b, double* error) {
  if (a == b) {
    if (error) *error = 0.0;
    return 0.0;
  }
  int lo = std::min(a, b), hi = std::max(a, b);
  auto it = cache_.find({lo, hi});
  if (it == cache_.end()) {
    double err = 0.0;
    double v = symplectic_form(*st_, table_->at(lo), table_->at(hi), opt_, &err);
    it = cache_.emplace(std::make_pair(lo, hi), std::make_pair(v, err)).first;
  }
  if (error) *error = it->second.second;
  return a < b ? it->second.first : -it->second.first;
}

Coef NumericPairing::operator()(int a, int b) { return Coef::from_double(value(a, b)); }

// ---------------------------------------------------------------------------

void check_smearing(const FieldType& field, const TestFunction& f) {
  if (f.weight != field.smearing_weight())
    throw DomainError("field '" + field.name + "' of weight " + std::to_string(field.weight) +
                      " needs weight " + std::to_string(field.smearing_weight()) + " test functions, got " +
                      std::to_string(f.weight));
}

int push_generator(const ConformalEmbedding& e, int id, TestFunctionTable& table) {
  if (table.spacetime(id) != e.source().name())
    throw DomainError("generator f" + std::to_string(id) + " does not live on the source of '" + e.name() + "'");
  if (const auto* terms = table.expansion(id)) {
    std::vector<std::pair<Coef, int>> pushed;
    for (const auto& [c, t] : *terms) pushed.emplace_back(c, push_generator(e, t, table));
    return table.combination(pushed);
  }
  const TestFunction& f = table.at(id);
  check_smearing(generator_field, f);
  bool exact = table.is_p_exact(id);
  // copy before add(): the table may reallocate
  TestFunction pushed = weighted_pushforward(e, generator_field.smearing_weight(), TestFunction(f));
  int out = table.add(pushed);
  // P' (psi^(1) h) = psi^(3) (P h): witnesses stay witnesses
  if (exact) table.mark_p_exact(out);
  return out;
}

AlgebraElement apply_morphism(const ConformalEmbedding& e, const AlgebraElement& elem, TestFunctionTable& table) {
  if (elem.spacetime() != e.source().name())
    throw DomainError("element lives on '" + elem.spacetime() + "', embedding '" + e.name() + "' starts at '" +
                      e.source().name() + "'");
  AlgebraElement out(e.target().name());
  std::map<int, int> pushed;
  for (const auto& [w, c] : elem.terms()) {
    Word m;
    for (int id : w) {
      auto it = pushed.find(id);
      if (it == pushed.end()) it = pushed.emplace(id, push_generator(e, id, table)).first;
      m.push_back(it->second);
    }
    out.add_term(m, c);
  }
  return out;
}

double coefficient_distance(const AlgebraElement& a, const AlgebraElement& b) {
  double worst = 0.0;
  auto diff = a - b;
  for (const auto& [w, c] : diff.terms()) {
    auto [re, im] = c.to_double();
    worst = std::max(worst, std::hypot(re, im));
  }
  return worst;
}

// ---------------------------------------------------------------------------

OscillatorModel::OscillatorModel(int generators, std::mt19937& rng) {
  std::uniform_int_distribution<int> coef(-3, 3);
  c_.resize(generators);
  for (auto& row : c_)
    for (auto& c : row) c = {coef(rng), coef(rng)};
}

PairingOracle OscillatorModel::pairing() const {
  return [this](int a, int b) -> Coef {
    int im = 0;  // Im sum_k c_ak conj(c_bk)
    for (int k = 0; k < modes; ++k)
      im += c_.at(a)[k].second * c_.at(b)[k].first - c_.at(a)[k].first * c_.at(b)[k].second;
    return Coef(2 * im);
  };
}

namespace {

template <class Op, class V>
void add_to(Op& op, const OscillatorModel::Key& k, const V& v) {
  if (v.first == 0 && v.second == 0) return;
  auto [pos, fresh] = op.emplace(k, v);
  if (!fresh) {
    pos->second.first += v.first;
    pos->second.second += v.second;
    if (pos->second.first == 0 && pos->second.second == 0) op.erase(pos);
  }
}

template <class T>
std::pair<T, T> times(const std::pair<T, T>& a, int re, int im) {
  return {a.first * re - a.second * im, a.first * im + a.second * re};
}

}  // namespace

// phi(f) times an operator in Wick order, from the left.
OscillatorModel::IntOperator OscillatorModel::multiply(int id, const IntOperator& op) const {
  const auto& c = c_.at(id);
  IntOperator next;
  for (const auto& [key, v] : op)
    for (int k = 0; k < modes; ++k) {
      auto [re, im] = c[k];
      Key z = key;
      ++z[k];
      add_to(next, z, times(v, re, -im));
      // d_k z^a d^b = a_k z^(a - e_k) d^b + z^a d^(b + e_k)
      Key d = key;
      ++d[modes + k];
      add_to(next, d, times(v, re, im));
      if (key[k] > 0) {
        Key lower = key;
        --lower[k];
        add_to(next, lower, times(v, key[k] * re, key[k] * im));
      }
    }
  return next;
}

const OscillatorModel::IntOperator& OscillatorModel::suffix(const Word& w, std::size_t from, Cache& cache) const {
  Word key(w.begin() + static_cast<std::ptrdiff_t>(from), w.end());
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  IntOperator op =
      from == w.size() ? IntOperator{{Key{}, {Int(1), Int(0)}}} : multiply(w[from], suffix(w, from + 1, cache));
  return cache.emplace(std::move(key), std::move(op)).first->second;
}

OscillatorModel::Operator OscillatorModel::represent(const Word& w) const {
  return represent(AlgebraElement::word("", w));
}

OscillatorModel::Operator OscillatorModel::represent(const AlgebraElement& a) const {
  Cache cache;
  std::map<Key, std::pair<Rational, Rational>> acc;
  for (const auto& [w, c] : a.terms())
    for (const auto& [k, v] : suffix(w, 0, cache)) {
      Rational re(v.first.convert_to<Integer>()), im(v.second.convert_to<Integer>());
      add_to(acc, k, std::pair<Rational, Rational>{c.re * re - c.im * im, c.re * im + c.im * re});
    }
  Operator out;
  for (auto& [k, v] : acc) out.emplace(k, Coef(std::move(v.first), std::move(v.second)));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// counts[m] = number of sets of m disjoint pairs among the elements of `free`
void enumerate_pairings(unsigned free, int m, std::vector<Integer>& counts) {
  if (free == 0) {
    ++counts[m];
    return;
  }
  int i = std::countr_zero(free);
  unsigned rest = free & ~(1u << i);
  enumerate_pairings(rest, m, counts);  // i stays unpaired
  for (unsigned r = rest; r; r &= r - 1) {
    int j = std::countr_zero(r);
    enumerate_pairings(rest & ~(1u << j), m + 1, counts);
  }
}

Integer factorial(int n) {
  Integer f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

Integer pairing_count(int n, int m) {
  if (m < 0 || 2 * m > n) return 0;
  return factorial(n) / (factorial(m) * (Integer(1) << m) * factorial(n - 2 * m));
}

PairingExpansion wick_expand(int n) {
  if (n < 0 || n > 12) throw std::out_of_range("wick_expand needs 0 <= n <= 12");
  std::vector<Integer> counts(n / 2 + 1);
  enumerate_pairings(n == 0 ? 0u : (1u << n) - 1, 0, counts);
  PairingExpansion p;
  p.n = n;
  for (int m = 0; m <= n / 2; ++m) p.coeff[n - 2 * m] = counts[m];
  return p;
}

PairingExpansion wick_inverse(int n) {
  if (n < 0) throw std::out_of_range("wick_inverse needs n >= 0");
  PairingExpansion p;
  p.n = n;
  for (int m = 0; m <= n / 2; ++m) p.coeff[n - 2 * m] = (m % 2 ? -1 : 1) * pairing_count(n, m);
  return p;
}

PairingExpansion reorder_prescription(int n) {
  if (n < 0) throw std::out_of_range("reorder_prescription needs n >= 0");
  PairingExpansion p;
  p.n = n;
  for (int m = 1; m <= n / 2; ++m) p.coeff[n - 2 * m] = pairing_count(n, m);
  return p;
}

PairingExpansion reorder_by_composition(int n, std::size_t* leftover) {
  // (j, power of H, power of B) -> coefficient
  std::map<std::array<int, 3>, Integer> poly;
  for (const auto& [k, a] : wick_inverse(n).coeff) {
    int mh = (n - k) / 2;
    for (const auto& [j, b] : wick_expand(k).coeff) {
      int mw = (k - j) / 2;
      Integer binom = 1;
      for (int r = 0; r <= mw; ++r) {
        poly[{j, mh + r, mw - r}] += a * b * binom;
        binom = binom * (mw - r) / (r + 1);
      }
    }
  }
  PairingExpansion p;
  p.n = n;
  std::size_t rest = 0;
  for (const auto& [key, c] : poly) {
    if (c == 0) continue;
    if (key[1] != 0 || 2 * key[2] != n - key[0]) ++rest;
    else if (key[0] != n) p.coeff[key[0]] = c;
    else if (c != 1) ++rest;
  }
  if (leftover) *leftover = rest;
  return p;
}

std::string PairingExpansion::str(const std::string& h, bool wick) const {
  std::ostringstream os;
  bool first = true;
  for (auto it = coeff.rbegin(); it != coeff.rend(); ++it) {
    auto [k, c] = *it;
    if (c == 0) continue;
    int m = (n - k) / 2;
    os << (first ? (c < 0 ? "-" : "") : (c < 0 ? " - " : " + "));
    first = false;
    Integer a = c < 0 ? Integer(-c) : c;
    bool bare = true;
    if (a != 1) {
      os << a;
      bare = false;
    }
    if (m > 0) {
      os << (bare ? "" : " ") << h << (m > 1 ? "^" + std::to_string(m) : "");
      bare = false;
    }
    if (k > 0) {
      std::string mark = wick ? ":" : "";
      os << (bare ? "" : " ") << mark << "phi" << (k > 1 ? "^" + std::to_string(k) : "") << mark;
    }
    else if (bare) os << "1";
  }
  return first ? "0" : os.str();
}

RenormShift operator+(const RenormShift& a, const RenormShift& b) {
  if (a.k != b.k) throw std::out_of_range("renormalization shifts of different order");
  RenormShift out = a;
  for (const auto& [i, c] : b.C) {
    auto [it, fresh] = out.C.emplace(i, c);
    if (!fresh) it->second = it->second + c;
  }
  return out;
}

FieldPolynomial renorm_apply(const RenormShift& shift, int k) {
  if (shift.k != k) throw std::out_of_range("shift of order " + std::to_string(shift.k) + " applied to phi^" +
                                            std::to_string(k));
  FieldPolynomial out;
  out.terms[k] = Expr::constant(1.0);
  for (const auto& [i, c] : shift.C) {
    if (i < 0 || i > k - 2) throw std::out_of_range("renormalization index " + std::to_string(i) + " outside 0.." +
                                                    std::to_string(k - 2));
    out.terms[i] = c;
  }
  return out;
}

std::string FieldPolynomial::str() const {
  std::ostringstream os;
  bool first = true;
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) {
    if (!first) os << " + ";
    first = false;
    const auto& [i, c] = *it;
    std::string p = i == 0 ? "1" : i == 1 ? "phi" : "phi^" + std::to_string(i);
    if (c.is_one()) os << p;
    else os << "(" << c.str() << ")" << (i == 0 ? "" : "*" + p);
  }
  return os.str();
}

}  // namespace chlab
