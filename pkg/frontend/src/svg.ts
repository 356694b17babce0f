/** Minimal hand-rolled SVG chart primitives (no DOM, string assembly only). */

export const WIDTH = 760;
export const HEIGHT = 440;
export const MARGIN = { left: 64, right: 24, top: 40, bottom: 48 };

export const PALETTE = [
  "#4361ee", "#e63946", "#2d6a4f", "#f77f00", "#7209b7", "#0096c7",
];

export interface Scale {
  (v: number): number;
  domain: [number, number];
  log: boolean;
}

function makeScale(lo: number, hi: number, rLo: number, rHi: number,
                   log: boolean): Scale {
  if (log) {
    const a = Math.log10(lo);
    const b = Math.log10(hi);
    const f = ((v: number) =>
      rLo + ((Math.log10(v) - a) / (b - a || 1)) * (rHi - rLo)) as Scale;
    f.domain = [lo, hi];
    f.log = true;
    return f;
  }
  const f = ((v: number) =>
    rLo + ((v - lo) / (hi - lo || 1)) * (rHi - rLo)) as Scale;
  f.domain = [lo, hi];
  f.log = false;
  return f;
}

export function xScale(lo: number, hi: number, log = false): Scale {
  return makeScale(lo, hi, MARGIN.left, WIDTH - MARGIN.right, log);
}

export function yScale(lo: number, hi: number, log = false): Scale {
  return makeScale(lo, hi, HEIGHT - MARGIN.bottom, MARGIN.top, log);
}

export function extent(values: number[], pad = 0.05): [number, number] {
  const finite = values.filter((v) => Number.isFinite(v));
  let lo = Math.min(...finite);
  let hi = Math.max(...finite);
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const span = hi - lo;
  return [lo - pad * span, hi + pad * span];
}

export function ticks(lo: number, hi: number, n = 6): number[] {
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / n / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = mult * step;
  const out: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + 1e-12 * span; v += s) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

const fmt = (v: number) =>
  Math.abs(v) >= 1e4 || (v !== 0 && Math.abs(v) < 1e-3)
    ? v.toExponential(1)
    : String(Math.round(v * 1e6) / 1e6);

export function polyline(xs: number[], ys: number[], sx: Scale, sy: Scale,
                         color: string, width = 1.5, dash = ""): string {
  const pts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    if (!Number.isFinite(xs[i]) || !Number.isFinite(ys[i])) continue;
    if (sy.log && ys[i] <= 0) continue;
    pts.push(`${sx(xs[i]).toFixed(2)},${sy(ys[i]).toFixed(2)}`);
  }
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<polyline fill="none" stroke="${color}" stroke-width="${width}"${dashAttr} points="${pts.join(" ")}"/>`;
}

export function band(xs: number[], lo: number[], hi: number[], sx: Scale,
                     sy: Scale, color: string, opacity = 0.18): string {
  const up = xs.map((x, i) => `${sx(x).toFixed(2)},${sy(hi[i]).toFixed(2)}`);
  const dn = xs
    .map((x, i) => `${sx(x).toFixed(2)},${sy(lo[i]).toFixed(2)}`)
    .reverse();
  return `<polygon fill="${color}" opacity="${opacity}" points="${up.concat(dn).join(" ")}"/>`;
}

export function axes(sx: Scale, sy: Scale, xLabel: string, yLabel: string,
                     title: string): string {
  const parts: string[] = [];
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  parts.push(`<rect x="0" y="0" width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(`<text x="${WIDTH / 2}" y="22" text-anchor="middle" font-size="15" font-family="sans-serif">${title}</text>`);
  const xt = sx.log
    ? logTicks(sx.domain[0], sx.domain[1])
    : ticks(sx.domain[0], sx.domain[1]);
  for (const t of xt) {
    const px = sx(t);
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y1}" stroke="#eee"/>`);
    parts.push(`<text x="${px}" y="${y0 + 18}" text-anchor="middle" font-size="11" font-family="sans-serif">${fmt(t)}</text>`);
  }
  const yt = sy.log
    ? logTicks(sy.domain[0], sy.domain[1])
    : ticks(sy.domain[0], sy.domain[1]);
  for (const t of yt) {
    const py = sy(t);
    parts.push(`<line x1="${x0}" y1="${py}" x2="${x1}" y2="${py}" stroke="#eee"/>`);
    parts.push(`<text x="${x0 - 6}" y="${py + 4}" text-anchor="end" font-size="11" font-family="sans-serif">${fmt(t)}</text>`);
  }
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="#333"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="#333"/>`);
  parts.push(`<text x="${(x0 + x1) / 2}" y="${HEIGHT - 10}" text-anchor="middle" font-size="12" font-family="sans-serif">${xLabel}</text>`);
  parts.push(`<text x="16" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="12" font-family="sans-serif" transform="rotate(-90 16 ${(y0 + y1) / 2})">${yLabel}</text>`);
  return parts.join("\n");
}

function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let e = Math.ceil(Math.log10(lo)); Math.pow(10, e) <= hi * 1.0001; e++) {
    out.push(Math.pow(10, e));
  }
  return out.length >= 2 ? out : [lo, hi];
}

export function legend(entries: Array<{ label: string; color: string; dash?: string }>): string {
  const parts: string[] = [];
  let y = MARGIN.top + 8;
  const x = WIDTH - MARGIN.right - 180;
  for (const e of entries) {
    const dashAttr = e.dash ? ` stroke-dasharray="${e.dash}"` : "";
    parts.push(`<line x1="${x}" y1="${y}" x2="${x + 22}" y2="${y}" stroke="${e.color}" stroke-width="2"${dashAttr}/>`);
    parts.push(`<text x="${x + 28}" y="${y + 4}" font-size="11" font-family="sans-serif">${e.label}</text>`);
    y += 16;
  }
  return parts.join("\n");
}

export function document(body: string): string {
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">\n${body}\n</svg>\n`;
}
