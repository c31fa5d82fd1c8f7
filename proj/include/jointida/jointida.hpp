#pragma once

#include "jointida/types.hpp"
#include "jointida/graph.hpp"
#include "jointida/sem.hpp"
#include "jointida/opin.hpp"
#include "jointida/asymptotics.hpp"
#include "jointida/parentsets.hpp"
#include "jointida/learn.hpp"
#include "jointida/pipeline.hpp"
#include "jointida/io.hpp"
#include "jointida/validation.hpp"
