#ifndef HUBBARD_IMPURITY_HPP
#define HUBBARD_IMPURITY_HPP

#include "hubbard_impurity/errors.hpp"
#include "hubbard_impurity/model.hpp"
#include "hubbard_impurity/region.hpp"
#include "hubbard_impurity/integrability.hpp"
#include "hubbard_impurity/exact_diag.hpp"
#include "hubbard_impurity/dual.hpp"
#include "hubbard_impurity/bethe.hpp"
#include "hubbard_impurity/special.hpp"
#include "hubbard_impurity/kernels.hpp"
#include "hubbard_impurity/thermo.hpp"
#include "hubbard_impurity/wiener_hopf.hpp"

#endif
