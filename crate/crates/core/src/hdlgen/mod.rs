//! VHDL-2008 emission for a fixed-point network.
//!
//! A bundle for a network named `net` holds:
//!
//! | file | content |
//! |------|---------|
//! | `net_top.vhd` | top level: network CU, layers, output counters |
//! | `net_network_cu.vhd` | step counter and start/ready sequencing of the layers |
//! | `net_layer_<k>.vhd` | layer CU, synapse ROMs and neuron instances |
//! | `net_neuron_<model>.vhd` | one entity per distinct (reduced) neuron datapath |
//! | `net_counters.vhd` | saturating output spike counters |
//! | `net_tb.vhd` | file-driven testbench |
//! | `net_l<k>_ff.mem`, `net_l<k>_fb.mem` | synapse memory contents |
//! | `net_stimuli.txt` | testbench input, only when a stimulus is supplied |
//!
//! Memory files hold one line per input index (the memory depth). Each line
//! concatenates the two's complement weights of every neuron for that input,
//! neuron 0 in the most significant slot, as `'0'`/`'1'` characters.
//!
//! All blocks use a single clock and a synchronous active-high reset.

pub mod lint;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fxp::{FxpFormat, MAX_WIDTH};
use crate::network::{self, LayerSpec, NetworkSpec, Propagation, SimOptions, WeightMatrix};
use crate::neuron::{reduce_model, NeuronOrder, NeuronSpec, ResetMode};
use crate::spikes::SpikeStream;

/// Generated files keyed by file name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HdlBundle {
    name: String,
    files: BTreeMap<String, String>,
}

impl HdlBundle {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn files(&self) -> &BTreeMap<String, String> {
        &self.files
    }

    pub fn get(&self, file: &str) -> Option<&str> {
        self.files.get(file).map(String::as_str)
    }

    pub fn file_names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.files
            .iter()
            .map(|(name, text)| {
                let path = dir.join(name);
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}

/// Turns an arbitrary name into a VHDL basic identifier.
pub fn vhdl_identifier(name: &str) -> String {
    let mut out = String::new();
    for ch in name.chars() {
        let c = if ch.is_ascii_alphanumeric() {
            ch.to_ascii_lowercase()
        } else {
            '_'
        };
        if c == '_' && (out.is_empty() || out.ends_with('_')) {
            continue;
        }
        out.push(c);
    }
    while out.ends_with('_') {
        out.pop();
    }
    if out.is_empty() {
        out.push_str("snn");
    } else if !out.starts_with(|c: char| c.is_ascii_alphabetic()) {
        out.insert_str(0, "snn_");
    }
    out
}

/// Output counter width: `ceil(log2(n_cycles)) + 1`.
pub fn counter_width(n_cycles: usize) -> u32 {
    let mut w = 0;
    while (1u64 << w) < n_cycles as u64 {
        w += 1;
    }
    w + 1
}

/// Memory file names of layer `k` (1-based).
pub fn mem_file_names(net: &str, k: usize) -> (String, String) {
    (format!("{net}_l{k}_ff.mem"), format!("{net}_l{k}_fb.mem"))
}

pub fn stimulus_file_name(net: &str) -> String {
    format!("{net}_stimuli.txt")
}

/// One line per column (input), rows (neurons) concatenated, row 0 first.
pub fn emit_weight_mem(m: &WeightMatrix) -> String {
    let fmt = m.format();
    let mut out = String::with_capacity(m.cols() * (m.rows() * fmt.bits() as usize + 1));
    for c in 0..m.cols() {
        for r in 0..m.rows() {
            out.push_str(&fmt.to_bits(m.get(r, c)));
        }
        out.push('\n');
    }
    out
}

/// FF memory text and, for recurrent layers, FB memory text.
pub fn emit_meminit(layer: &LayerSpec) -> (String, Option<String>) {
    (emit_weight_mem(&layer.w_ff), layer.w_fb.as_ref().map(emit_weight_mem))
}

/// Inverse of [`emit_weight_mem`].
pub fn parse_meminit(text: &str, n_neurons: usize, fmt: FxpFormat) -> Result<WeightMatrix> {
    let width = n_neurons * fmt.bits() as usize;
    let lines: Vec<&str> = text.lines().collect();
    let mut data = vec![0i64; n_neurons * lines.len()];
    for (c, line) in lines.iter().enumerate() {
        if line.len() != width {
            return Err(Error::Parse {
                line: c + 1,
                message: format!("line has {} characters, expected {width}", line.len()),
            });
        }
        for r in 0..n_neurons {
            let word = &line[r * fmt.bits() as usize..(r + 1) * fmt.bits() as usize];
            let raw = fmt.from_bits(word).ok_or_else(|| Error::Parse {
                line: c + 1,
                message: format!("invalid word `{word}`"),
            })?;
            data[r * lines.len() + c] = raw as i64;
        }
    }
    WeightMatrix::new(n_neurons, lines.len(), fmt, data)
}

/// One line per step, channel 0 leftmost.
pub fn emit_stimulus(stimulus: &SpikeStream) -> String {
    let mut out = String::with_capacity((stimulus.n_channels() + 1) * stimulus.n_steps());
    for row in stimulus.steps() {
        out.extend(row.iter().map(|&b| if b { '1' } else { '0' }));
        out.push('\n');
    }
    out
}

/// Structural bundle plus a testbench that dumps the output counters.
pub fn generate(spec: &NetworkSpec, name: &str) -> Result<HdlBundle> {
    build(spec, name, None)
}

/// Like [`generate`], adding the stimulus file and the simulator's expected
/// counts to the testbench.
pub fn generate_with_stimulus(spec: &NetworkSpec, name: &str, stimulus: &SpikeStream) -> Result<HdlBundle> {
    build(spec, name, Some(stimulus))
}

/// Testbench text and, when a stimulus is given, stimulus file text.
pub fn emit_testbench(
    spec: &NetworkSpec,
    name: &str,
    stimulus: Option<&SpikeStream>,
) -> Result<(String, Option<String>)> {
    spec.validate()?;
    let net = vhdl_identifier(name);
    let expected = match stimulus {
        None => None,
        Some(s) => {
            if s.n_channels() != spec.n_inputs() || s.n_steps() != spec.n_cycles {
                return Err(Error::Usage(format!(
                    "stimulus is {} channels x {} steps, network expects {} x {}",
                    s.n_channels(),
                    s.n_steps(),
                    spec.n_inputs(),
                    spec.n_cycles
                )));
            }
            Some(network::run(spec, s, &SimOptions::default())?.out_counts)
        }
    };
    Ok((testbench(spec, &net, expected.as_deref()), stimulus.map(emit_stimulus)))
}

fn check_widths(spec: &NetworkSpec) -> Result<()> {
    let too_wide = |what: String, bits: u32| {
        if bits > MAX_WIDTH {
            Err(Error::Generation(format!(
                "{what} is {bits} bits wide, at most {MAX_WIDTH} are supported"
            )))
        } else {
            Ok(())
        }
    };
    for (k, l) in spec.layers.iter().enumerate() {
        too_wide(format!("layer {} neuron word", k + 1), l.neuron.bits.bits())?;
        too_wide(format!("layer {} FF weight", k + 1), l.w_ff.format().bits())?;
        if let Some(w) = &l.w_fb {
            too_wide(format!("layer {} FB weight", k + 1), w.format().bits())?;
        }
    }
    too_wide("output counter".into(), counter_width(spec.n_cycles))
}

fn build(spec: &NetworkSpec, name: &str, stimulus: Option<&SpikeStream>) -> Result<HdlBundle> {
    spec.validate()?;
    check_widths(spec)?;
    let net = vhdl_identifier(name);
    let mut files = BTreeMap::new();

    let mut variants = BTreeSet::new();
    for (k, layer) in spec.layers.iter().enumerate() {
        let reduced = reduce_model(&layer.neuron);
        variants.insert(reduced.model);
        let (ff_name, fb_name) = mem_file_names(&net, k + 1);
        let (ff, fb) = emit_meminit(layer);
        files.insert(ff_name, ff);
        if let Some(fb) = fb {
            files.insert(fb_name, fb);
        }
        files.insert(
            format!("{net}_layer_{}.vhd", k + 1),
            layer_unit(&net, k + 1, layer, &reduced),
        );
    }
    for model in variants {
        files.insert(
            format!("{net}_neuron_{}.vhd", model.tag()),
            neuron_unit(&net, model.order, model.reset),
        );
    }
    files.insert(format!("{net}_network_cu.vhd"), network_cu(&net, spec));
    files.insert(format!("{net}_counters.vhd"), counters(&net, spec));
    files.insert(format!("{net}_top.vhd"), top(&net, spec));
    let (tb, stim) = emit_testbench(spec, name, stimulus)?;
    files.insert(format!("{net}_tb.vhd"), tb);
    if let Some(stim) = stim {
        files.insert(stimulus_file_name(&net), stim);
    }
    Ok(HdlBundle { name: net, files })
}

const LIBRARIES: &str = "library ieee;\nuse ieee.std_logic_1164.all;\nuse ieee.numeric_std.all;\n";

const SAT_FUNCTIONS: &str = r#"  function sat_add(a, b : signed) return signed is
    variable s : signed(a'length downto 0);
    variable r : signed(a'length - 1 downto 0);
  begin
    s := resize(a, a'length + 1) + resize(b, a'length + 1);
    if s(s'high) /= s(s'high - 1) then
      r := (others => not s(s'high));
      r(r'high) := s(s'high);
    else
      r := s(r'range);
    end if;
    return r;
  end function;

  function sat_sub(a, b : signed) return signed is
    variable s : signed(a'length downto 0);
    variable r : signed(a'length - 1 downto 0);
  begin
    s := resize(a, a'length + 1) - resize(b, a'length + 1);
    if s(s'high) /= s(s'high - 1) then
      r := (others => not s(s'high));
      r(r'high) := s(s'high);
    else
      r := s(r'range);
    end if;
    return r;
  end function;
"#;

fn neuron_unit(net: &str, order: NeuronOrder, reset: ResetMode) -> String {
    let tag = crate::neuron::NeuronModel::new(order, reset).tag();
    let entity = format!("{net}_neuron_{tag}");
    let mut s = String::new();
    s.push_str(LIBRARIES);
    let _ = writeln!(s);
    let what = match order {
        NeuronOrder::If => "Integrate-and-fire neuron",
        NeuronOrder::Lif1 => "First-order leaky integrate-and-fire neuron",
        NeuronOrder::Lif2 => "Second-order leaky integrate-and-fire neuron",
    };
    let how = match reset {
        ResetMode::Static => "reset to V_RESET",
        ResetMode::Subtractive => "subtractive reset",
    };
    let _ = writeln!(s, "-- {what}, {how}.");
    let _ = writeln!(s, "-- acc_en adds w_in to the step accumulator; update applies leak,");
    let _ = writeln!(s, "-- integration and the threshold test, and clears the accumulator.");
    let _ = writeln!(s, "entity {entity} is");
    let _ = writeln!(s, "  generic (");
    let mut generics = vec!["    N_BITS      : positive := 8".to_string()];
    if order == NeuronOrder::Lif2 {
        generics.push("    ALPHA_SHIFT : natural := 1".into());
        generics.push("    IMMEDIATE   : boolean := false".into());
    }
    if order != NeuronOrder::If {
        generics.push("    BETA_SHIFT  : natural := 1".into());
    }
    generics.push("    V_TH        : integer := 0".into());
    if reset == ResetMode::Static {
        generics.push("    V_RESET     : integer := 0".into());
    }
    let _ = writeln!(s, "{}", generics.join(";\n"));
    let _ = writeln!(s, "  );");
    s.push_str(
        "  port (
    clk    : in  std_logic;
    rst    : in  std_logic;
    clear  : in  std_logic;
    acc_en : in  std_logic;
    update : in  std_logic;
    w_in   : in  signed(N_BITS - 1 downto 0);
    spike  : out std_logic
  );
end entity;

",
    );
    let _ = writeln!(s, "architecture rtl of {entity} is");
    s.push_str(SAT_FUNCTIONS);
    s.push_str(
        "
  constant TH : signed(N_BITS - 1 downto 0) := to_signed(V_TH, N_BITS);
  signal acc  : signed(N_BITS - 1 downto 0);
  signal v_m  : signed(N_BITS - 1 downto 0);
",
    );
    if order == NeuronOrder::Lif2 {
        s.push_str("  signal i_syn : signed(N_BITS - 1 downto 0);\n");
    }
    s.push_str("begin\n  process (clk)\n    variable v_next : signed(N_BITS - 1 downto 0);\n");
    if order == NeuronOrder::Lif2 {
        s.push_str("    variable i_next : signed(N_BITS - 1 downto 0);\n");
    }
    s.push_str(
        "  begin
    if rising_edge(clk) then
      if rst = '1' or clear = '1' then
        acc   <= (others => '0');
        v_m   <= (others => '0');
",
    );
    if order == NeuronOrder::Lif2 {
        s.push_str("        i_syn <= (others => '0');\n");
    }
    s.push_str(
        "        spike <= '0';
      elsif acc_en = '1' then
        acc <= sat_add(acc, w_in);
      elsif update = '1' then
",
    );
    match order {
        NeuronOrder::If => s.push_str("        v_next := sat_add(v_m, acc);\n"),
        NeuronOrder::Lif1 => s.push_str("        v_next := sat_add(v_m - shift_right(v_m, BETA_SHIFT), acc);\n"),
        NeuronOrder::Lif2 => s.push_str(
            "        i_next := sat_add(i_syn - shift_right(i_syn, ALPHA_SHIFT), acc);
        if IMMEDIATE then
          v_next := sat_add(v_m - shift_right(v_m, BETA_SHIFT), i_next);
        else
          v_next := sat_add(v_m - shift_right(v_m, BETA_SHIFT), i_syn);
        end if;
        i_syn <= i_next;
",
        ),
    }
    s.push_str("        if v_next > TH then\n");
    match reset {
        ResetMode::Static => s.push_str("          v_m <= to_signed(V_RESET, N_BITS);\n"),
        ResetMode::Subtractive => s.push_str("          v_m <= sat_sub(v_next, TH);\n"),
    }
    s.push_str(
        "          spike <= '1';
        else
          v_m   <= v_next;
          spike <= '0';
        end if;
        acc <= (others => '0');
      end if;
    end if;
  end process;
end architecture;
",
    );
    s
}

fn neuron_generic_map(n: &NeuronSpec) -> String {
    let mut parts = vec!["N_BITS => N_BITS".to_string()];
    if n.model.order == NeuronOrder::Lif2 {
        parts.push(format!("ALPHA_SHIFT => {}", n.alpha_shift.unwrap_or(1)));
        parts.push(format!("IMMEDIATE => {}", n.immediate_current));
    }
    if n.model.order != NeuronOrder::If {
        parts.push(format!("BETA_SHIFT => {}", n.beta_shift.unwrap_or(1)));
    }
    parts.push(format!("V_TH => {}", n.v_th.raw()));
    if n.model.reset == ResetMode::Static {
        parts.push(format!("V_RESET => {}", n.v_reset.raw()));
    }
    parts.join(", ")
}

fn rom_loader(s: &mut String, kind: &str, depth: &str, width: &str) {
    let _ = writeln!(
        s,
        "  type {kind}_rom_t is array (0 to {depth} - 1) of std_logic_vector({width} - 1 downto 0);"
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "  impure function load_{kind}(path : string) return {kind}_rom_t is");
    let _ = writeln!(s, "    file f      : text open read_mode is path;");
    let _ = writeln!(s, "    variable l    : line;");
    let _ = writeln!(s, "    variable word : bit_vector({width} - 1 downto 0);");
    let _ = writeln!(s, "    variable rom  : {kind}_rom_t;");
    let _ = writeln!(s, "  begin");
    let _ = writeln!(s, "    for a in rom'range loop");
    let _ = writeln!(s, "      readline(f, l);");
    let _ = writeln!(s, "      read(l, word);");
    let _ = writeln!(s, "      rom(a) := to_stdlogicvector(word);");
    let _ = writeln!(s, "    end loop;");
    let _ = writeln!(s, "    return rom;");
    let _ = writeln!(s, "  end function;");
    let _ = writeln!(s);
}

fn layer_unit(net: &str, k: usize, layer: &LayerSpec, reduced: &NeuronSpec) -> String {
    let entity = format!("{net}_layer_{k}");
    let recurrent = layer.is_recurrent();
    let (ff_mem, fb_mem) = mem_file_names(net, k);
    let mut s = String::new();
    s.push_str(LIBRARIES);
    s.push_str("use std.textio.all;\n\n");
    let _ = writeln!(
        s,
        "-- Layer {k} control unit. On start the input spikes (and, when recurrent,"
    );
    let _ = writeln!(s, "-- the layer's own previous spikes) are latched. If none is set the");
    let _ = writeln!(s, "-- accumulation phases are skipped; otherwise CNT walks the synapse");
    let _ = writeln!(
        s,
        "-- memory one row per cycle and every neuron adds its weight when the"
    );
    let _ = writeln!(s, "-- corresponding spike is set.");
    let _ = writeln!(s, "entity {entity} is");
    let _ = writeln!(s, "  generic (");
    let _ = writeln!(s, "    N_INPUTS  : positive := {};", layer.n_inputs);
    let _ = writeln!(s, "    N_NEURONS : positive := {};", layer.n_neurons);
    let _ = writeln!(s, "    N_BITS    : positive := {};", layer.neuron.bits.bits());
    let _ = writeln!(s, "    FF_BITS   : positive := {};", layer.w_ff.format().bits());
    if let Some(w) = &layer.w_fb {
        let _ = writeln!(s, "    FB_BITS   : positive := {};", w.format().bits());
        let _ = writeln!(s, "    FB_MEM    : string   := \"{fb_mem}\";");
    }
    let _ = writeln!(s, "    FF_MEM    : string   := \"{ff_mem}\"");
    s.push_str(
        "  );
  port (
    clk        : in  std_logic;
    rst        : in  std_logic;
    clear      : in  std_logic;
    start      : in  std_logic;
    ready      : out std_logic;
    spikes_in  : in  std_logic_vector(N_INPUTS - 1 downto 0);
    spikes_out : out std_logic_vector(N_NEURONS - 1 downto 0)
  );
end entity;

",
    );
    let _ = writeln!(s, "architecture rtl of {entity} is");
    rom_loader(&mut s, "ff", "N_INPUTS", "N_NEURONS * FF_BITS");
    if recurrent {
        rom_loader(&mut s, "fb", "N_NEURONS", "N_NEURONS * FB_BITS");
    }
    s.push_str(
        "  function sat_resize(x : signed; n : positive) return signed is
    variable r : signed(n - 1 downto 0);
  begin
    if x'length <= n then
      return resize(x, n);
    end if;
    r := resize(x, n);
    if resize(r, x'length) /= x then
      r := (others => not x(x'high));
      r(r'high) := x(x'high);
    end if;
    return r;
  end function;

  type word_array is array (0 to N_NEURONS - 1) of signed(N_BITS - 1 downto 0);
  type state_t is (IDLE, CHECK, FF_READ, FB_READ, DRAIN, FIRE);

  signal ff_rom   : ff_rom_t := load_ff(FF_MEM);
",
    );
    if recurrent {
        s.push_str("  signal fb_rom   : fb_rom_t := load_fb(FB_MEM);\n");
    }
    let cnt_max = layer.n_inputs.max(layer.n_neurons);
    let _ = writeln!(s, "  signal state    : state_t;");
    let _ = writeln!(s, "  signal cnt      : natural range 0 to {cnt_max};");
    s.push_str(
        "  signal in_reg   : std_logic_vector(N_INPUTS - 1 downto 0);
  signal fb_reg   : std_logic_vector(N_NEURONS - 1 downto 0);
  signal any_ff   : std_logic;
  signal any_fb   : std_logic;
  signal ff_word  : std_logic_vector(N_NEURONS * FF_BITS - 1 downto 0);
",
    );
    if recurrent {
        s.push_str("  signal fb_word  : std_logic_vector(N_NEURONS * FB_BITS - 1 downto 0);\n");
        s.push_str("  signal rd_fb    : std_logic;\n");
    }
    s.push_str(
        "  signal rd_valid : std_logic;
  signal acc_en   : std_logic;
  signal update   : std_logic;
  signal w_bus    : word_array;
  signal spikes   : std_logic_vector(N_NEURONS - 1 downto 0);
begin
  any_ff     <= or in_reg;
  any_fb     <= or fb_reg;
  acc_en     <= rd_valid;
  update     <= '1' when state = FIRE else '0';
  ready      <= '1' when state = IDLE else '0';
  spikes_out <= spikes;

  control : process (clk)
  begin
    if rising_edge(clk) then
      rd_valid <= '0';
      if rst = '1' then
        state  <= IDLE;
        cnt    <= 0;
        in_reg <= (others => '0');
        fb_reg <= (others => '0');
      else
        case state is
          when IDLE =>
            if start = '1' then
              in_reg <= spikes_in;
              fb_reg <= spikes;
              cnt    <= 0;
              state  <= CHECK;
            end if;
          when CHECK =>
            if any_ff = '1' then
              state <= FF_READ;
",
    );
    if recurrent {
        s.push_str(
            "            elsif any_fb = '1' then
              state <= FB_READ;
",
        );
    }
    s.push_str(
        "            else
              state <= FIRE;
            end if;
          when FF_READ =>
            ff_word  <= ff_rom(cnt);
            rd_valid <= in_reg(cnt);
",
    );
    if recurrent {
        s.push_str("            rd_fb    <= '0';\n");
    }
    s.push_str(
        "            if cnt = N_INPUTS - 1 then
              cnt <= 0;
",
    );
    if recurrent {
        s.push_str(
            "              if any_fb = '1' then
                state <= FB_READ;
              else
                state <= DRAIN;
              end if;
",
        );
    } else {
        s.push_str("              state <= DRAIN;\n");
    }
    s.push_str(
        "            else
              cnt <= cnt + 1;
            end if;
          when FB_READ =>
",
    );
    if recurrent {
        s.push_str(
            "            fb_word  <= fb_rom(cnt);
            rd_valid <= fb_reg(cnt);
            rd_fb    <= '1';
            if cnt = N_NEURONS - 1 then
              cnt   <= 0;
              state <= DRAIN;
            else
              cnt <= cnt + 1;
            end if;
",
        );
    } else {
        s.push_str("            state <= DRAIN;\n");
    }
    s.push_str(
        "          when DRAIN =>
            state <= FIRE;
          when FIRE =>
            state <= IDLE;
        end case;
      end if;
    end if;
  end process;

  neurons : for j in 0 to N_NEURONS - 1 generate
",
    );
    let ff_slice = "ff_word((N_NEURONS - j) * FF_BITS - 1 downto (N_NEURONS - 1 - j) * FF_BITS)";
    if recurrent {
        let fb_slice = "fb_word((N_NEURONS - j) * FB_BITS - 1 downto (N_NEURONS - 1 - j) * FB_BITS)";
        let _ = writeln!(
            s,
            "    w_bus(j) <= sat_resize(signed({fb_slice}), N_BITS) when rd_fb = '1'"
        );
        let _ = writeln!(s, "           else sat_resize(signed({ff_slice}), N_BITS);");
    } else {
        let _ = writeln!(s, "    w_bus(j) <= sat_resize(signed({ff_slice}), N_BITS);");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "    neuron : entity work.{net}_neuron_{}", reduced.model.tag());
    let _ = writeln!(s, "      generic map ({})", neuron_generic_map(reduced));
    s.push_str(
        "      port map (
        clk    => clk,
        rst    => rst,
        clear  => clear,
        acc_en => acc_en,
        update => update,
        w_in   => w_bus(j),
        spike  => spikes(j)
      );
  end generate;
end architecture;
",
    );
    s
}

fn network_cu(net: &str, spec: &NetworkSpec) -> String {
    let entity = format!("{net}_network_cu");
    let immediate = spec.propagation == Propagation::Immediate;
    let mut s = String::new();
    s.push_str(LIBRARIES);
    let _ = writeln!(s);
    let _ = writeln!(s, "-- Network control unit. CNT counts steps up to N_CYCLES. Each step");
    let _ = writeln!(
        s,
        "-- requests an input word (sample), starts the layers and waits on their"
    );
    if immediate {
        let _ = writeln!(
            s,
            "-- ready signals. Layers run one after another so spikes cross the whole"
        );
        let _ = writeln!(s, "-- network within a step.");
    } else {
        let _ = writeln!(
            s,
            "-- ready signals. All layers start together, each consuming the output"
        );
        let _ = writeln!(
            s,
            "-- its predecessor produced in the previous step; their ready signals"
        );
        let _ = writeln!(s, "-- are combined by an AND tree.");
    }
    let _ = writeln!(s, "entity {entity} is");
    let _ = writeln!(s, "  generic (");
    let _ = writeln!(s, "    N_LAYERS : positive := {};", spec.layers.len());
    let _ = writeln!(s, "    N_CYCLES : positive := {}", spec.n_cycles);
    s.push_str(
        "  );
  port (
    clk         : in  std_logic;
    rst         : in  std_logic;
    start       : in  std_logic;
    ready       : out std_logic;
    sample      : out std_logic;
    clear       : out std_logic;
    step_done   : out std_logic;
    layer_start : out std_logic_vector(N_LAYERS - 1 downto 0);
    layer_ready : in  std_logic_vector(N_LAYERS - 1 downto 0)
  );
end entity;

",
    );
    let _ = writeln!(s, "architecture rtl of {entity} is");
    s.push_str(
        "  type state_t is (IDLE, INIT, FETCH, LAUNCH, WAIT_LAYERS, ADVANCE);
  signal state     : state_t;
  signal cnt       : natural range 0 to N_CYCLES - 1;
  signal all_ready : std_logic;
",
    );
    if immediate {
        s.push_str("  signal current   : natural range 0 to N_LAYERS - 1;\n");
    }
    s.push_str(
        "begin
  all_ready <= and layer_ready;
  ready     <= '1' when state = IDLE else '0';
  clear     <= '1' when state = INIT else '0';
  sample    <= '1' when state = FETCH else '0';
  step_done <= '1' when state = ADVANCE else '0';
",
    );
    if immediate {
        s.push_str(
            "
  starts : for k in 0 to N_LAYERS - 1 generate
    layer_start(k) <= '1' when state = LAUNCH and current = k else '0';
  end generate;
",
        );
    } else {
        s.push_str("  layer_start <= (others => '1') when state = LAUNCH else (others => '0');\n");
    }
    s.push_str(
        "
  process (clk)
  begin
    if rising_edge(clk) then
      if rst = '1' then
        state <= IDLE;
        cnt   <= 0;
",
    );
    if immediate {
        s.push_str("        current <= 0;\n");
    }
    s.push_str(
        "      else
        case state is
          when IDLE =>
            if start = '1' then
              state <= INIT;
            end if;
          when INIT =>
            cnt   <= 0;
            state <= FETCH;
          when FETCH =>
",
    );
    if immediate {
        s.push_str("            current <= 0;\n");
    }
    s.push_str(
        "            state <= LAUNCH;
          when LAUNCH =>
            state <= WAIT_LAYERS;
          when WAIT_LAYERS =>
",
    );
    if immediate {
        s.push_str(
            "            if layer_ready(current) = '1' then
              if current = N_LAYERS - 1 then
                state <= ADVANCE;
              else
                current <= current + 1;
                state   <= LAUNCH;
              end if;
            end if;
",
        );
    } else {
        s.push_str(
            "            if all_ready = '1' then
              state <= ADVANCE;
            end if;
",
        );
    }
    s.push_str(
        "          when ADVANCE =>
            if cnt = N_CYCLES - 1 then
              state <= IDLE;
            else
              cnt   <= cnt + 1;
              state <= FETCH;
            end if;
        end case;
      end if;
    end if;
  end process;
end architecture;
",
    );
    s
}

fn counters(net: &str, spec: &NetworkSpec) -> String {
    let entity = format!("{net}_counters");
    let mut s = String::new();
    s.push_str(LIBRARIES);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "-- Saturating spike counters, one per output neuron; counter 0 occupies"
    );
    let _ = writeln!(s, "-- the most significant slot of counts.");
    let _ = writeln!(s, "entity {entity} is");
    let _ = writeln!(s, "  generic (");
    let _ = writeln!(s, "    N_OUTPUTS : positive := {};", spec.n_outputs());
    let _ = writeln!(s, "    CNT_BITS  : positive := {}", counter_width(spec.n_cycles));
    s.push_str(
        "  );
  port (
    clk    : in  std_logic;
    rst    : in  std_logic;
    clear  : in  std_logic;
    enable : in  std_logic;
    spikes : in  std_logic_vector(N_OUTPUTS - 1 downto 0);
    counts : out std_logic_vector(N_OUTPUTS * CNT_BITS - 1 downto 0)
  );
end entity;

",
    );
    let _ = writeln!(s, "architecture rtl of {entity} is");
    s.push_str(
        "  type count_array is array (0 to N_OUTPUTS - 1) of unsigned(CNT_BITS - 1 downto 0);
  signal cnt : count_array;
begin
  process (clk)
  begin
    if rising_edge(clk) then
      if rst = '1' or clear = '1' then
        cnt <= (others => (others => '0'));
      elsif enable = '1' then
        for j in 0 to N_OUTPUTS - 1 loop
          if spikes(j) = '1' and cnt(j) /= (cnt(j)'range => '1') then
            cnt(j) <= cnt(j) + 1;
          end if;
        end loop;
      end if;
    end if;
  end process;

  outputs : for j in 0 to N_OUTPUTS - 1 generate
    counts((N_OUTPUTS - j) * CNT_BITS - 1 downto (N_OUTPUTS - 1 - j) * CNT_BITS) <= std_logic_vector(cnt(j));
  end generate;
end architecture;
",
    );
    s
}

fn top(net: &str, spec: &NetworkSpec) -> String {
    let entity = format!("{net}_top");
    let n_layers = spec.layers.len();
    let mut s = String::new();
    s.push_str(LIBRARIES);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "-- Accelerator top level. Pulse start to run one inference of N_CYCLES"
    );
    let _ = writeln!(
        s,
        "-- steps; sample requests the next input word and ready rises with the"
    );
    let _ = writeln!(s, "-- final counts on counts.");
    let _ = writeln!(s, "entity {entity} is");
    let _ = writeln!(s, "  generic (");
    let _ = writeln!(s, "    N_INPUTS  : positive := {};", spec.n_inputs());
    let _ = writeln!(s, "    N_OUTPUTS : positive := {};", spec.n_outputs());
    let _ = writeln!(s, "    CNT_BITS  : positive := {}", counter_width(spec.n_cycles));
    s.push_str(
        "  );
  port (
    clk       : in  std_logic;
    rst       : in  std_logic;
    start     : in  std_logic;
    ready     : out std_logic;
    sample    : out std_logic;
    spikes_in : in  std_logic_vector(N_INPUTS - 1 downto 0);
    counts    : out std_logic_vector(N_OUTPUTS * CNT_BITS - 1 downto 0)
  );
end entity;

",
    );
    let _ = writeln!(s, "architecture rtl of {entity} is");
    let _ = writeln!(s, "  signal clear       : std_logic;");
    let _ = writeln!(s, "  signal step_done   : std_logic;");
    let _ = writeln!(s, "  signal layer_start : std_logic_vector({} - 1 downto 0);", n_layers);
    let _ = writeln!(s, "  signal layer_ready : std_logic_vector({} - 1 downto 0);", n_layers);
    for (k, l) in spec.layers.iter().enumerate() {
        let _ = writeln!(
            s,
            "  signal l{}_spikes   : std_logic_vector({} - 1 downto 0);",
            k + 1,
            l.n_neurons
        );
    }
    s.push_str("begin\n");
    let _ = writeln!(s, "  cu : entity work.{net}_network_cu");
    s.push_str(
        "    port map (
      clk         => clk,
      rst         => rst,
      start       => start,
      ready       => ready,
      sample      => sample,
      clear       => clear,
      step_done   => step_done,
      layer_start => layer_start,
      layer_ready => layer_ready
    );
",
    );
    for k in 1..=n_layers {
        let input = if k == 1 {
            "spikes_in".to_string()
        } else {
            format!("l{}_spikes", k - 1)
        };
        let _ = writeln!(s);
        let _ = writeln!(s, "  layer_{k} : entity work.{net}_layer_{k}");
        let _ = writeln!(s, "    port map (");
        let _ = writeln!(s, "      clk        => clk,");
        let _ = writeln!(s, "      rst        => rst,");
        let _ = writeln!(s, "      clear      => clear,");
        let _ = writeln!(s, "      start      => layer_start({}),", k - 1);
        let _ = writeln!(s, "      ready      => layer_ready({}),", k - 1);
        let _ = writeln!(s, "      spikes_in  => {input},");
        let _ = writeln!(s, "      spikes_out => l{k}_spikes");
        let _ = writeln!(s, "    );");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "  counters : entity work.{net}_counters");
    let _ = writeln!(s, "    port map (");
    let _ = writeln!(s, "      clk    => clk,");
    let _ = writeln!(s, "      rst    => rst,");
    let _ = writeln!(s, "      clear  => clear,");
    let _ = writeln!(s, "      enable => step_done,");
    let _ = writeln!(s, "      spikes => l{n_layers}_spikes,");
    let _ = writeln!(s, "      counts => counts");
    let _ = writeln!(s, "    );");
    s.push_str("end architecture;\n");
    s
}

fn testbench(spec: &NetworkSpec, net: &str, expected: Option<&[u32]>) -> String {
    let entity = format!("{net}_tb");
    let n_out = spec.n_outputs();
    let mut s = String::new();
    s.push_str(LIBRARIES);
    s.push_str("use std.textio.all;\n\n");
    let _ = writeln!(
        s,
        "-- Reads one input word per step from {} (channel 0 leftmost),",
        stimulus_file_name(net)
    );
    let _ = writeln!(s, "-- runs one inference and reports the output counters.");
    let _ = writeln!(s, "entity {entity} is");
    let _ = writeln!(s, "end entity;");
    let _ = writeln!(s);
    let _ = writeln!(s, "architecture sim of {entity} is");
    let _ = writeln!(s, "  constant N_INPUTS   : positive := {};", spec.n_inputs());
    let _ = writeln!(s, "  constant N_OUTPUTS  : positive := {n_out};");
    let _ = writeln!(s, "  constant N_CYCLES   : positive := {};", spec.n_cycles);
    let _ = writeln!(
        s,
        "  constant CNT_BITS   : positive := {};",
        counter_width(spec.n_cycles)
    );
    let _ = writeln!(
        s,
        "  constant STIMULI    : string   := \"{}\";",
        stimulus_file_name(net)
    );
    let _ = writeln!(s, "  constant CLK_PERIOD : time     := 10 ns;");
    let _ = writeln!(s, "  constant CHECK      : boolean  := {};", expected.is_some());
    let _ = writeln!(s);
    let _ = writeln!(s, "  type count_list is array (0 to N_OUTPUTS - 1) of natural;");
    let values: Vec<String> = (0..n_out)
        .map(|j| format!("{j} => {}", expected.map_or(0, |e| e[j])))
        .collect();
    let _ = writeln!(s, "  constant EXPECTED : count_list := ({});", values.join(", "));
    s.push_str(
        "
  signal clk       : std_logic := '0';
  signal rst       : std_logic := '1';
  signal start     : std_logic := '0';
  signal ready     : std_logic;
  signal sample    : std_logic;
  signal spikes_in : std_logic_vector(N_INPUTS - 1 downto 0) := (others => '0');
  signal counts    : std_logic_vector(N_OUTPUTS * CNT_BITS - 1 downto 0);
  signal finished  : boolean := false;
begin
  clk <= not clk after CLK_PERIOD / 2 when not finished;

",
    );
    let _ = writeln!(s, "  dut : entity work.{net}_top");
    s.push_str(
        "    port map (
      clk       => clk,
      rst       => rst,
      start     => start,
      ready     => ready,
      sample    => sample,
      spikes_in => spikes_in,
      counts    => counts
    );

  stimulus : process
    file f          : text open read_mode is STIMULI;
    variable l      : line;
    variable word   : string(1 to N_INPUTS);
    variable count  : natural;
    variable errors : natural := 0;
  begin
    wait for 2 * CLK_PERIOD;
    wait until rising_edge(clk);
    rst <= '0';
    wait until rising_edge(clk);
    start <= '1';
    wait until rising_edge(clk);
    start <= '0';
    for t in 0 to N_CYCLES - 1 loop
      wait until rising_edge(clk) and sample = '1';
      readline(f, l);
      read(l, word);
      for c in 0 to N_INPUTS - 1 loop
        if word(c + 1) = '1' then
          spikes_in(c) <= '1';
        else
          spikes_in(c) <= '0';
        end if;
      end loop;
    end loop;
    wait until rising_edge(clk) and ready = '1';
    for j in 0 to N_OUTPUTS - 1 loop
      count := to_integer(unsigned(counts((N_OUTPUTS - j) * CNT_BITS - 1 downto (N_OUTPUTS - 1 - j) * CNT_BITS)));
      report \"count(\" & integer'image(j) & \") = \" & integer'image(count);
      if CHECK and count /= EXPECTED(j) then
        report \"expected \" & integer'image(EXPECTED(j)) severity error;
        errors := errors + 1;
      end if;
    end loop;
    if CHECK and errors = 0 then
      report \"all counts match\";
    end if;
    finished <= true;
    wait;
  end process;
end architecture;
",
    );
    s
}
