#pragma once

#include "wfpd/core.hpp"
#include "wfpd/esf_crp.hpp"
#include "wfpd/experiments.hpp"
#include "wfpd/fv_dual.hpp"
#include "wfpd/genealogy.hpp"
#include "wfpd/measures.hpp"
#include "wfpd/random.hpp"
#include "wfpd/stats.hpp"
#include "wfpd/stein_bounds.hpp"
#include "wfpd/wright_fisher.hpp"
