#ifndef PLATFORM_EGT_HPP
#define PLATFORM_EGT_HPP

#include "platform_egt/combinatorics.hpp"
#include "platform_egt/config_io.hpp"
#include "platform_egt/csv.hpp"
#include "platform_egt/domain.hpp"
#include "platform_egt/dynamics.hpp"
#include "platform_egt/metrics.hpp"
#include "platform_egt/oracle.hpp"
#include "platform_egt/parallel.hpp"
#include "platform_egt/payoff.hpp"
#include "platform_egt/philox.hpp"
#include "platform_egt/recsel.hpp"
#include "platform_egt/sweep.hpp"

#endif  // PLATFORM_EGT_HPP
