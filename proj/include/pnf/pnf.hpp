#ifndef PNF_PNF_HPP
#define PNF_PNF_HPP

#include <pnf/error.hpp>
#include <pnf/periodic.hpp>
#include <pnf/periodic_matrix.hpp>
#include <pnf/series.hpp>
#include <pnf/diffeo.hpp>
#include <pnf/poisson.hpp>
#include <pnf/spectral.hpp>
#include <pnf/normalize.hpp>
#include <pnf/invariants.hpp>
#include <pnf/foliation.hpp>
#include <pnf/ode_oracle.hpp>

#endif
