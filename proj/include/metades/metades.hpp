#ifndef METADES_METADES_HPP
#define METADES_METADES_HPP

#include "metades/common.hpp"
#include "metades/competence.hpp"
#include "metades/data.hpp"
#include "metades/des.hpp"
#include "metades/harness.hpp"
#include "metades/meta.hpp"
#include "metades/pool.hpp"
#include "metades/random.hpp"
#include "metades/stats.hpp"

#endif  // METADES_METADES_HPP
