fn main() {
    println!("dsgm");
}
