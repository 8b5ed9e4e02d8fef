#pragma once

#include "caoi/carbon.hpp"
#include "caoi/cidata.hpp"
#include "caoi/dessim.hpp"
#include "caoi/error.hpp"
#include "caoi/optimizer.hpp"
#include "caoi/queueing.hpp"
#include "caoi/units.hpp"
#include "caoi/version.hpp"
