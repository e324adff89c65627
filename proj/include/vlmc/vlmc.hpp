#pragma once

#include "vlmc/errors.hpp"
#include "vlmc/tokens.hpp"
#include "vlmc/ingest.hpp"
#include "vlmc/ngram.hpp"
#include "vlmc/model.hpp"
#include "vlmc/build.hpp"
#include "vlmc/trails.hpp"
#include "vlmc/eval.hpp"
#include "vlmc/config.hpp"
#include "vlmc/commands.hpp"
