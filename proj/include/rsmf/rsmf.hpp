#ifndef RSMF_RSMF_HPP
#define RSMF_RSMF_HPP

#include "rsmf/assembly.hpp"
#include "rsmf/blr.hpp"
#include "rsmf/cluster.hpp"
#include "rsmf/commsim.hpp"
#include "rsmf/core.hpp"
#include "rsmf/dense.hpp"
#include "rsmf/gmres.hpp"
#include "rsmf/hodlr.hpp"
#include "rsmf/lowrank.hpp"
#include "rsmf/multifrontal.hpp"
#include "rsmf/ordering.hpp"
#include "rsmf/solver.hpp"
#include "rsmf/sparse.hpp"
#include "rsmf/sptrsv.hpp"
#include "rsmf/symbolic.hpp"

#endif
