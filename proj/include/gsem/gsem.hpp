#pragma once

#include "gsem/analysis.hpp"
#include "gsem/csr.hpp"
#include "gsem/error.hpp"
#include "gsem/fpcodec.hpp"
#include "gsem/gallery.hpp"
#include "gsem/gse_csr.hpp"
#include "gsem/gsem_io.hpp"
#include "gsem/half.hpp"
#include "gsem/matrix_market.hpp"
#include "gsem/monitor.hpp"
#include "gsem/solvers.hpp"
#include "gsem/spmv.hpp"
