#pragma once

#include "fca/error.hpp"
#include "fca/grid.hpp"
#include "fca/models.hpp"
#include "fca/printed_drift.hpp"
#include "fca/kernel.hpp"
#include "fca/remap.hpp"
#include "fca/propagate.hpp"
#include "fca/joint.hpp"
#include "fca/black_scholes.hpp"
#include "fca/mc.hpp"
#include "fca/reference_pdf.hpp"
#include "fca/pricing.hpp"
#include "fca/csv.hpp"
#include "fca/validation.hpp"
