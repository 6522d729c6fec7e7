/** Colorblind-safe rendering for symbol ids.
 *
 * Symbol identity travels as COLORk ids; pixels come from the Okabe-Ito
 * palette, chosen for deuteranopia/protanopia/tritanopia separation.
 * The display_name is shown as a text label so no information rides on
 * hue alone.
 */

const OKABE_ITO: Record<string, string> = {
  COLOR1: "#D55E00", // vermillion
  COLOR2: "#009E73", // bluish green
  COLOR3: "#0072B2", // blue
  COLOR4: "#F0E442", // yellow
  COLOR5: "#CC79A7", // reddish purple
  COLOR6: "#E69F00", // orange
  COLOR7: "#56B4E9", // sky blue
  COLOR8: "#000000", // black
};

const FALLBACK = "#999999";

export function colorFor(id: string): string {
  return OKABE_ITO[id] ?? FALLBACK;
}

/** Dark text is unreadable on the darker swatches. */
export function textColorFor(id: string): string {
  return id === "COLOR8" || id === "COLOR3" || id === "COLOR1"
    ? "#ffffff"
    : "#111111";
}

export function knownIds(): string[] {
  return Object.keys(OKABE_ITO);
}
