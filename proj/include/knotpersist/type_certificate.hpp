#pragma once

// Same-knot-type evidence between two normalized configurations.

#include "knotpersist/knotid.hpp"
#include "knotpersist/normalize.hpp"

namespace knotpersist {

enum class CertificateRoute {
  Tube,                 // aligned vertices move less than the tube radius: isotopic
  DeterminantMatch,     // determinants agree: not refuted, not proven
  DeterminantMismatch,  // determinants differ: different types
};

struct TypeCertificate {
  bool same_type = false;  // true unless refuted
  CertificateRoute route = CertificateRoute::DeterminantMismatch;
  double displacement = kInf;
};

inline const char* to_string(CertificateRoute r) {
  switch (r) {
    case CertificateRoute::Tube: return "tube";
    case CertificateRoute::DeterminantMatch: return "determinant-match";
    case CertificateRoute::DeterminantMismatch: return "determinant-mismatch";
  }
  return "?";
}

inline TypeCertificate same_type_certificate(const NormalizedConfig& x, const NormalizedConfig& y,
                                             double max_step = 1.0) {
  TypeCertificate c;
  if (x.size() == y.size()) {
    c.displacement = max_displacement(x.knot, align(x, y).aligned);
    if (c.displacement < max_step) {
      c.same_type = true;
      c.route = CertificateRoute::Tube;
      return c;
    }
  }
  const bool match = x.fingerprint.determinant == y.fingerprint.determinant;
  c.same_type = match;
  c.route = match ? CertificateRoute::DeterminantMatch : CertificateRoute::DeterminantMismatch;
  return c;
}

}  // namespace knotpersist
