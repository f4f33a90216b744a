#pragma once

#include "assoc/kernels.hpp"

namespace assoc::kernels::detail {

extern const Table kScalarTable;
#if defined(ASSOC_HAVE_AVX2)
extern const Table kAvx2Table;
#endif

}  // namespace assoc::kernels::detail
