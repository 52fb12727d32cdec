#pragma once

#include "smcsec/record.hpp"
#include "smcsec/smc/beta.hpp"
#include "smcsec/smc/clopper_pearson.hpp"
#include "smcsec/smc/interval.hpp"
#include "smcsec/smc/property.hpp"
#include "smcsec/smc/tunnel.hpp"
#include "smcsec/cache/cache.hpp"
#include "smcsec/cache/sae.hpp"
#include "smcsec/lab/pnp.hpp"
#include "smcsec/lab/rollback.hpp"
#include "smcsec/runner/analysis.hpp"
#include "smcsec/runner/emit.hpp"
#include "smcsec/runner/reproduce.hpp"
