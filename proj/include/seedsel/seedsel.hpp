#pragma once

#include "seedsel/error.hpp"
#include "seedsel/rng.hpp"
#include "seedsel/corpus.hpp"
#include "seedsel/textpipe.hpp"
#include "seedsel/keywords.hpp"
#include "seedsel/cluster.hpp"
#include "seedsel/select.hpp"
#include "seedsel/learn.hpp"
#include "seedsel/eval.hpp"
#include "seedsel/synthetic.hpp"
#include "seedsel/config.hpp"
#include "seedsel/experiment.hpp"
#include "seedsel/report.hpp"
