#pragma once

// Exact CCR algebra over smeared generators phi(f), its transport along
// conformal embeddings, and the combinatorics of Wick ordering.
//
// Coefficients are Gaussian rationals. A generator is an id in a
// TestFunctionTable; ids also fix the total order used by the normal form,
// phi(f_i) phi(f_j) with i <= j. Relations:
//   (i)   linearity: a table entry may be declared as a combination of others
//   (ii)  phi(f)* = phi(conj f); all table functions are real
//   (iii) phi(P f) = 0 for entries flagged as P-exact witnesses
//   (iv)  phi(f) phi(g) - phi(g) phi(f) = i E(f, g) 1

#include <boost/multiprecision/cpp_int.hpp>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "chlab/confmap.hpp"
#include "chlab/propagator.hpp"

namespace chlab {

using Rational = boost::multiprecision::cpp_rational;
using Integer = boost::multiprecision::cpp_int;

struct Coef {
  Rational re, im;

  Coef() = default;
  Coef(Rational r, Rational i = 0) : re(std::move(r)), im(std::move(i)) {}
  Coef(int r) : re(r) {}
  static Coef i() { return {0, 1}; }
  static Coef from_double(double re, double im = 0.0);  // exact binary value

  bool is_zero() const { return re == 0 && im == 0; }
  Coef conj() const { return {re, -im}; }
  std::pair<double, double> to_double() const;
  std::string str() const;

  friend Coef operator+(const Coef& a, const Coef& b) { return {a.re + b.re, a.im + b.im}; }
  friend Coef operator-(const Coef& a, const Coef& b) { return {a.re - b.re, a.im - b.im}; }
  friend Coef operator-(const Coef& a) { return {-a.re, -a.im}; }
  friend Coef operator*(const Coef& a, const Coef& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
  }
  Coef& operator+=(const Coef& b) { return *this = *this + b; }
  friend bool operator==(const Coef& a, const Coef& b) { return a.re == b.re && a.im == b.im; }
};

// Smearing functions of the algebra, interned by value per spacetime.
class TestFunctionTable {
 public:
  // Returns the id of an existing entry on the same spacetime that agrees with
  // f on sample points, or registers f.
  int add(const TestFunction& f);
  // An entry standing for sum c_k f_k (relation (i)); all terms on one spacetime.
  int combination(const std::vector<std::pair<Coef, int>>& terms);
  // Flags an entry as P f for some test function (relation (iii)).
  void mark_p_exact(int id);

  const TestFunction& at(int id) const;
  const std::string& spacetime(int id) const;
  bool is_p_exact(int id) const;
  const std::vector<std::pair<Coef, int>>* expansion(int id) const;  // null unless a combination
  std::size_t size() const { return entries_.size(); }

  // Sampled equality used for interning (relative 1e-10).
  static bool same_function(const TestFunction& a, const TestFunction& b);

 private:
  struct Entry {
    std::string spacetime;
    std::shared_ptr<const TestFunction> f;  // null for combinations
    std::vector<std::pair<Coef, int>> terms;
    bool p_exact = false;
  };
  std::vector<Entry> entries_;
};

using Word = std::vector<int>;

class AlgebraElement {
 public:
  AlgebraElement() = default;
  explicit AlgebraElement(std::string spacetime) : spacetime_(std::move(spacetime)) {}

  static AlgebraElement identity(std::string spacetime);
  static AlgebraElement word(std::string spacetime, Word w, Coef c = 1);

  const std::string& spacetime() const { return spacetime_; }
  const std::map<Word, Coef>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  void add_term(const Word& w, const Coef& c);

  AlgebraElement star() const;
  std::string str() const;

  friend AlgebraElement operator+(const AlgebraElement& a, const AlgebraElement& b);
  friend AlgebraElement operator-(const AlgebraElement& a, const AlgebraElement& b);
  friend AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b);
  friend AlgebraElement operator*(const Coef& c, const AlgebraElement& a);
  friend bool operator==(const AlgebraElement& a, const AlgebraElement& b) {
    return a.spacetime_ == b.spacetime_ && a.terms_ == b.terms_;
  }

 private:
  std::string spacetime_;
  std::map<Word, Coef> terms_;  // no zero coefficients
};

// E(f, g) for generator ids; must be antisymmetric.
using PairingOracle = std::function<Coef(int, int)>;

AlgebraElement normal_form(const AlgebraElement& elem, const TestFunctionTable& table, const PairingOracle& E);

// Deterministic antisymmetric rational values standing in for E.
PairingOracle symbolic_pairing(std::uint64_t seed);

// E(f, g) from the causal propagator, cached; values are exact images of the doubles.
class NumericPairing {
 public:
  NumericPairing(std::shared_ptr<const Spacetime> st, const TestFunctionTable& table, PropagatorOptions opt = {});
  Coef operator()(int a, int b);
  double value(int a, int b, double* error = nullptr);

 private:
  std::shared_ptr<const Spacetime> st_;
  const TestFunctionTable* table_;
  PropagatorOptions opt_;
  std::map<std::pair<int, int>, std::pair<double, double>> cache_;
};

// alpha_psi: generators on e.source pushed with weight 3 and retagged to e.target.
AlgebraElement apply_morphism(const ConformalEmbedding& e, const AlgebraElement& elem, TestFunctionTable& table);
int push_generator(const ConformalEmbedding& e, int id, TestFunctionTable& table);

// Max |a - b| over coefficients, in doubles.
double coefficient_distance(const AlgebraElement& a, const AlgebraElement& b);

// A field of weight lambda is smeared with weight 4 - lambda test functions.
struct FieldType {
  std::string name;
  double weight = 1.0;
  double smearing_weight() const { return 4.0 - weight; }
};
inline const FieldType generator_field{"phi", 1.0};
// Throws DomainError unless f carries the smearing weight of the field.
void check_smearing(const FieldType& field, const TestFunction& f);

// Oscillator oracle: phi(f) = sum_k c_fk d/dz_k + conj(c_fk) z_k in six modes,
// so [phi(f), phi(g)] = 2i Im sum_k c_fk conj(c_gk). Products are brought to
// the unique Wick order z^a d^b of the Weyl algebra and compared there.
class OscillatorModel {
 public:
  static constexpr int modes = 6;
  using Key = std::array<int, 2 * modes>;  // exponents of z_1..z_6, then d_1..d_6
  using Operator = std::map<Key, Coef>;

  OscillatorModel(int generators, std::mt19937& rng);  // random small Gaussian integers c_fk
  PairingOracle pairing() const;
  Operator represent(const Word& w) const;
  Operator represent(const AlgebraElement& a) const;

 private:
  // words act with Gaussian-integer coefficients; overflow throws
  using Int = boost::multiprecision::checked_int128_t;
  using IntOperator = std::map<Key, std::pair<Int, Int>>;
  using Cache = std::map<Word, IntOperator>;
  IntOperator multiply(int id, const IntOperator& op) const;
  const IntOperator& suffix(const Word& w, std::size_t from, Cache& cache) const;

  std::vector<std::array<std::pair<int, int>, modes>> c_;
};

// phi^n = sum_m pairings(n, m) H^m :phi^(n-2m):. coeff[k] multiplies :phi^k: H^((n-k)/2).
struct PairingExpansion {
  int n = 0;
  std::map<int, Integer> coeff;
  std::string str(const std::string& h = "H", bool wick = true) const;  // wick: terms are :phi^k:
};

PairingExpansion wick_expand(int n);  // n <= 12, by enumerating pairings
// :phi^n: = sum_k coeff[k] phi^k H^((n-k)/2), the inverse (Hermite) connection.
PairingExpansion wick_inverse(int n);
// Number of ways to choose m disjoint pairs from n points, in closed form.
Integer pairing_count(int n, int m);

// :phi^n:_H - :phi^n:_{H+B} = sum_{k<n} coeff[k] B^((n-k)/2) :phi^k:_{H+B}.
PairingExpansion reorder_prescription(int n);
// The same difference by composition: :phi^n:_H expanded in phi^k with H, each
// phi^k re-expanded in :phi^j:_{H+B} with (H + B)^m multiplied out. Terms that
// keep a power of H are counted in `leftover` (zero when the two agree).
PairingExpansion reorder_by_composition(int n, std::size_t* leftover = nullptr);

// phi~^k = phi^k + sum_i C_i phi^i, 0 <= i <= k-2.
struct RenormShift {
  int k = 2;
  std::map<int, Expr> C;
};
RenormShift operator+(const RenormShift& a, const RenormShift& b);

// Coefficients of the Wick powers phi^i in a field expression.
struct FieldPolynomial {
  std::map<int, Expr> terms;
  std::string str() const;
};

// Throws std::out_of_range for indices outside 0..k-2 or a shift of another order.
FieldPolynomial renorm_apply(const RenormShift& shift, int k);

}  // namespace chlab
