#pragma once

#include <boost/dynamic_bitset.hpp>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfp {

using PointId = int;
using Dist = std::int64_t;
using PointSet = boost::dynamic_bitset<>;

inline constexpr Dist kInf = std::numeric_limits<Dist>::max() / 4;
inline constexpr Dist kDefaultScale = 1'000'000;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define SFP_ERROR(Name)                           \
  struct Name : Error {                           \
    explicit Name(const std::string& what = #Name) \
        : Error(what) {}                          \
  }

SFP_ERROR(TriangleViolation);
SFP_ERROR(NegativeDistance);
SFP_ERROR(EmptyInstance);
SFP_ERROR(DegenerateInstance);
SFP_ERROR(HeightUnderflow);
SFP_ERROR(NotATree);
SFP_ERROR(PreconditionUnverifiable);
SFP_ERROR(BudgetExceeded);
SFP_ERROR(NonPositiveWeight);
SFP_ERROR(NotLaminar);
SFP_ERROR(NotPortalRespecting);
SFP_ERROR(MissingBackPointer);
SFP_ERROR(UncoveredPoint);
SFP_ERROR(InvalidArgument);
SFP_ERROR(Infeasible);

#undef SFP_ERROR

inline std::vector<PointId> to_ids(const PointSet& s) {
  std::vector<PointId> out;
  for (auto i = s.find_first(); i != PointSet::npos; i = s.find_next(i))
    out.push_back(static_cast<PointId>(i));
  return out;
}

inline PointSet from_ids(std::size_t n, const std::vector<PointId>& ids) {
  PointSet s(n);
  for (PointId p : ids) s.set(static_cast<std::size_t>(p));
  return s;
}

// Integer power with saturation at kInf.
inline Dist sat_pow(Dist base, int e) {
  Dist r = 1;
  for (int i = 0; i < e; ++i) {
    if (r > kInf / base) return kInf;
    r *= base;
  }
  return r;
}

inline Dist sat_mul(Dist a, Dist b) {
  if (a == 0 || b == 0) return 0;
  if (a > kInf / b) return kInf;
  return a * b;
}

}  // namespace sfp
